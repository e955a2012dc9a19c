#include "rulescope/service.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <optional>
#include <set>
#include <shared_mutex>
#include <sstream>

#include "rulescope/error.h"
#include "rulescope/reorder.h"

namespace rulescope {

using nlohmann::json;

namespace {

struct GroupStage {
  std::size_t attribute = 0;
  std::vector<RowRange> ranges;
};

struct MatrixState {
  std::vector<RuleId> order;
  std::vector<std::size_t> pinned;
  AttributeOrder attributes;
  std::vector<GroupStage> groups;
  std::string mode = "coverage";
  bool descending = true;
  std::vector<std::size_t> arrows;
};

// Numeric range (lower, upper] or a category subset on one attribute.
struct Predicate {
  std::size_t attribute = 0;
  double lower = -kInf;
  double upper = kInf;
  std::optional<CategorySet> categories;

  bool Matches(const SampleTable& samples, std::size_t row) const {
    const double v = samples.value(row, attribute);
    if (categories) return categories->Contains(static_cast<std::size_t>(v));
    return v > lower && v <= upper;
  }
};

class HttpError : public Error {
 public:
  HttpError(int status, const std::string& message) : Error(message), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

std::vector<std::string> SplitPath(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream in(path);
  std::string part;
  while (std::getline(in, part, '/')) {
    if (!part.empty()) parts.push_back(part);
  }
  return parts;
}

json ParseBody(const std::string& body) {
  if (body.empty()) return json::object();
  try {
    json doc = json::parse(body);
    if (!doc.is_object()) throw ParseError("body", "expected a JSON object");
    return doc;
  } catch (const json::parse_error& e) {
    throw ParseError("body:" + std::to_string(e.byte), "invalid JSON");
  }
}

std::size_t AttributeByName(const DatasetSchema& schema, const json& name) {
  if (!name.is_string()) throw ValidationError("attribute must be given by name");
  const auto index = schema.FindAttribute(name.get<std::string>());
  if (!index) throw ValidationError("unknown attribute '" + name.get<std::string>() + "'");
  return *index;
}

std::vector<std::size_t> AttributeList(const DatasetSchema& schema, const json& names) {
  if (!names.is_array()) throw ValidationError("expected a list of attribute names");
  std::vector<std::size_t> out;
  for (const json& name : names) out.push_back(AttributeByName(schema, name));
  return out;
}

std::size_t ParseIndex(const std::string& text, const char* what) {
  std::size_t used = 0;
  unsigned long long value = 0;
  try {
    value = std::stoull(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || text[0] == '-') {
    throw ValidationError(std::string("invalid ") + what + " '" + text + "'");
  }
  return static_cast<std::size_t>(value);
}

Predicate ParsePredicate(const DatasetSchema& schema, const json& doc) {
  if (!doc.is_object() || !doc.contains("attribute")) {
    throw ValidationError("predicate needs an attribute");
  }
  Predicate p;
  p.attribute = AttributeByName(schema, doc["attribute"]);
  const AttributeSpec& spec = schema.attribute(p.attribute);
  if (spec.is_categorical()) {
    if (!doc.contains("categories") || !doc["categories"].is_array()) {
      throw ValidationError("categorical predicate on '" + spec.name + "' needs categories");
    }
    CategorySet set(spec.categories.size(), false);
    for (const json& label : doc["categories"]) {
      if (!label.is_string()) throw ValidationError("category labels must be strings");
      const auto c = schema.FindCategory(p.attribute, label.get<std::string>());
      if (!c) throw ValidationError("unknown category '" + label.get<std::string>() + "'");
      set.Insert(*c);
    }
    p.categories = std::move(set);
    return p;
  }
  if (doc.contains("categories")) {
    throw ValidationError("numeric predicate on '" + spec.name + "' takes lower/upper");
  }
  const auto bound = [&](const char* key, double fallback) {
    if (!doc.contains(key) || doc[key].is_null()) return fallback;
    if (!doc[key].is_number()) throw ValidationError(std::string(key) + " must be a number");
    return doc[key].get<double>();
  };
  p.lower = bound("lower", -kInf);
  p.upper = bound("upper", kInf);
  if (!doc.contains("lower") && !doc.contains("upper")) {
    throw ValidationError("numeric predicate needs lower or upper");
  }
  if (!(p.lower < p.upper)) throw ValidationError("predicate range is empty");
  return p;
}

}  // namespace

json RoundedNumber(double value) {
  if (!std::isfinite(value)) return nullptr;
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.6g", value);
  return std::stod(buffer);
}

class Session {
 public:
  Session(std::string id_in, std::shared_ptr<const Analysis> analysis_in,
          HierarchyOptions options, const ServiceOptions& service)
      : id(std::move(id_in)),
        analysis(std::move(analysis_in)),
        hierarchy(analysis, std::move(options)),
        service_options(service) {
    stats.reserve(analysis->rules.size());
    for (const Rule& rule : analysis->rules) {
      stats.push_back(ComputeRuleStats(rule, analysis->coverage, analysis->samples));
    }
    states.push_back(DefaultState({}, nullptr));
    Touch();
  }

  void Touch() { last_access = std::chrono::steady_clock::now().time_since_epoch().count(); }

  std::chrono::steady_clock::time_point last_used() const {
    return std::chrono::steady_clock::time_point(
        std::chrono::steady_clock::duration(last_access.load()));
  }

  SimilarityContext Context() const {
    SimilarityContext context;
    context.rules = analysis->rules;
    context.schema = &analysis->schema;
    context.maps = &analysis->maps;
    context.tau = service_options.tau;
    return context;
  }

  std::vector<double> Metric(const std::string& mode) const {
    std::vector<double> values(analysis->rules.size());
    for (RuleId id = 0; id < values.size(); ++id) {
      if (mode == "coverage") {
        values[id] = static_cast<double>(stats[id].coverage);
      } else if (mode == "confidence") {
        values[id] = stats[id].zero_coverage ? std::nan("") : stats[id].confidence;
      } else {
        values[id] = analysis->scores[id];
      }
    }
    return values;
  }

  MatrixState DefaultState(std::vector<std::size_t> pinned, const MatrixState* previous) const {
    const HierarchyLevel& level = hierarchy.current();
    MatrixState state;
    state.pinned = std::move(pinned);
    state.order = SortByMetric(level.representatives, Metric("coverage"), true);
    state.attributes = SortAttributes(analysis->rules, level.representatives,
                                      analysis->schema.num_attributes(), state.pinned,
                                      service_options.attribute_page_size);
    if (previous) {
      state.arrows = RankIncreaseArrows(previous->attributes.order, state.attributes.order);
    }
    return state;
  }

  std::vector<std::size_t> CoveredRows() const {
    const HierarchyLevel& level = hierarchy.current();
    std::set<std::size_t> rows;
    for (RuleId id : level.representatives) {
      for (std::size_t row : analysis->coverage.samples_covered(id)) rows.insert(row);
    }
    std::vector<std::size_t> out;
    std::set_intersection(rows.begin(), rows.end(), level.scope_samples.begin(),
                          level.scope_samples.end(), std::back_inserter(out));
    return out;
  }

  json ConditionJson(std::size_t attribute, const Condition& condition) const {
    const AttributeSpec& spec = analysis->schema.attribute(attribute);
    json out = {{"attribute", spec.name}, {"index", attribute}};
    if (const auto* set = std::get_if<CategorySet>(&condition)) {
      json labels = json::array();
      for (std::size_t c : set->Indices()) labels.push_back(spec.categories[c]);
      out["kind"] = "categorical";
      out["categories"] = labels;
      out["category_indices"] = set->Indices();
    } else {
      const auto& interval = std::get<Interval>(condition);
      out["kind"] = "numeric";
      out["lower"] = RoundedNumber(interval.lower);
      out["upper"] = RoundedNumber(interval.upper);
      out["q_lower"] = RoundedNumber(analysis->maps.Map(attribute, interval.lower));
      out["q_upper"] = RoundedNumber(analysis->maps.Map(attribute, interval.upper));
    }
    return out;
  }

  json Payload() const {
    const HierarchyLevel& level = hierarchy.current();
    const MatrixState& state = states.back();
    const DatasetSchema& schema = analysis->schema;

    json rules = json::array();
    for (RuleId id : state.order) {
      const Rule& rule = analysis->rules[id];
      json conditions = json::array();
      for (const auto& [attribute, condition] : rule.conditions) {
        conditions.push_back(ConditionJson(attribute, condition));
      }
      const auto parent = level.parents.at(id);
      rules.push_back({{"id", id},
                       {"parent", parent ? json(*parent) : json()},
                       {"label", schema.classes()[rule.label]},
                       {"label_index", rule.label},
                       {"weight", RoundedNumber(rule.weight)},
                       {"conditions", conditions},
                       {"coverage", stats[id].coverage},
                       {"confidence", stats[id].zero_coverage ? json()
                                                              : RoundedNumber(stats[id].confidence)},
                       {"anomaly_score", RoundedNumber(analysis->scores[id])},
                       {"neighborhood_size", level.NeighborhoodSize(id)}});
    }

    json attributes = json::array();
    for (std::size_t k = 0; k < state.attributes.order.size(); ++k) {
      const std::size_t a = state.attributes.order[k];
      std::vector<std::size_t> per_label(schema.num_classes(), 0);
      for (RuleId id : level.representatives) {
        if (analysis->rules[id].Uses(a)) ++per_label[analysis->rules[id].label];
      }
      const bool pinned =
          std::find(state.pinned.begin(), state.pinned.end(), a) != state.pinned.end();
      attributes.push_back({{"name", schema.attribute(a).name},
                            {"index", a},
                            {"kind", schema.attribute(a).is_categorical() ? "categorical" : "numeric"},
                            {"usage", state.attributes.usage[a]},
                            {"label_counts", per_label},
                            {"page", k / state.attributes.page_size},
                            {"pinned", pinned}});
    }

    json groups = json::array();
    for (const GroupStage& stage : state.groups) {
      json ranges = json::array();
      for (const RowRange& r : stage.ranges) ranges.push_back({r.begin, r.end});
      groups.push_back({{"attribute", schema.attribute(stage.attribute).name}, {"ranges", ranges}});
    }

    json arrows = json::array();
    for (std::size_t a : state.arrows) arrows.push_back(schema.attribute(a).name);

    const Selection& selection = level.selection;
    return {{"session", id},
            {"depth", level.depth},
            {"selected", level.selected},
            {"row_order", state.order},
            {"rules", rules},
            {"attributes", attributes},
            {"page_size", state.attributes.page_size},
            {"num_pages", state.attributes.num_pages()},
            {"arrows", arrows},
            {"groups", groups},
            {"sort", {{"mode", state.mode}, {"direction", state.descending ? "desc" : "asc"}}},
            {"scope", {{"rules", level.scope_rules.size()}, {"samples", level.scope_samples.size()}}},
            {"reduction",
             {{"reduced", selection.reduced},
              {"xi", RoundedNumber(selection.xi)},
              {"lambda", RoundedNumber(selection.lambda)},
              {"fidelity_train", RoundedNumber(selection.fidelity_train)},
              {"fidelity_test", RoundedNumber(selection.fidelity_test)},
              {"average_anomaly_score", RoundedNumber(selection.average_anomaly_score)}}}};
  }

  json Zoom(const json& body) {
    if (!body.contains("rules") || !body["rules"].is_array()) {
      throw ValidationError("zoom needs a 'rules' list");
    }
    std::vector<RuleId> selected;
    for (const json& v : body["rules"]) {
      if (!v.is_number_unsigned()) throw ValidationError("rule ids must be non-negative integers");
      selected.push_back(v.get<RuleId>());
    }
    const MatrixState previous = states.back();
    hierarchy.ZoomIn(selected);
    states.push_back(DefaultState(previous.pinned, &previous));
    return Payload();
  }

  json Back() {
    if (hierarchy.depth() == 0) throw HttpError(409, "already at the root level");
    hierarchy.ZoomOut();
    states.pop_back();
    return Payload();
  }

  json Order(const json& body) {
    const DatasetSchema& schema = analysis->schema;
    const HierarchyLevel& level = hierarchy.current();
    MatrixState state = states.back();
    if (body.contains("pinned")) {
      state.pinned = AttributeList(schema, body["pinned"]);
      state.attributes = SortAttributes(analysis->rules, level.representatives,
                                        schema.num_attributes(), state.pinned,
                                        service_options.attribute_page_size);
    }
    const std::string mode = body.value("mode", std::string());
    if (mode == "coverage" || mode == "confidence" || mode == "anomaly") {
      const std::string direction = body.value("direction", std::string("desc"));
      if (direction != "asc" && direction != "desc") {
        throw ValidationError("direction must be 'asc' or 'desc'");
      }
      state.descending = direction == "desc";
      state.mode = mode;
      state.order = SortByMetric(state.order, Metric(mode), state.descending);
      state.groups.clear();
    } else if (mode == "group") {
      if (!body.contains("attribute")) throw ValidationError("group needs an attribute");
      const std::size_t attribute = AttributeByName(schema, body["attribute"]);
      const auto blocks = GroupByAttribute(state.order, attribute, analysis->rules, schema);
      GroupStage stage{attribute, {}};
      state.order.clear();
      for (const auto& block : blocks) {
        stage.ranges.push_back({state.order.size(), state.order.size() + block.size()});
        state.order.insert(state.order.end(), block.begin(), block.end());
      }
      state.mode = "group";
      state.groups = {stage};
    } else if (mode == "reorder") {
      if (!body.contains("attributes")) throw ValidationError("reorder needs attributes");
      const std::vector<std::size_t> attrs = AttributeList(schema, body["attributes"]);
      if (attrs.empty()) throw ValidationError("reorder needs at least one attribute");
      ReorderResult result = ReorderRules(state.order, attrs, Context());
      state.order = std::move(result.order);
      state.groups.clear();
      for (std::size_t j = 0; j < attrs.size(); ++j) {
        state.groups.push_back({attrs[j], std::move(result.groups[j])});
      }
      state.mode = "reordered";
    } else if (!mode.empty()) {
      throw ValidationError("unknown order mode '" + mode + "'");
    } else if (!body.contains("pinned")) {
      throw ValidationError("order needs a mode or pinned attributes");
    }
    states.back() = std::move(state);
    return Payload();
  }

  json RuleDetail(const std::string& text) const {
    const HierarchyLevel& level = hierarchy.current();
    RuleId rid = 0;
    try {
      rid = ParseIndex(text, "rule id");
    } catch (const ValidationError&) {
      throw HttpError(404, "unknown rule '" + text + "'");
    }
    if (!std::binary_search(level.representatives.begin(), level.representatives.end(), rid)) {
      throw HttpError(404, "rule " + text + " is not displayed");
    }
    const Rule& rule = analysis->rules[rid];
    const DatasetSchema& schema = analysis->schema;
    const SampleTable& samples = analysis->samples;
    std::vector<std::size_t> covered;
    for (std::size_t row : analysis->coverage.samples_covered(rid)) {
      if (samples.split(row) == Split::kTrain) covered.push_back(row);
    }
    json distributions = json::array();
    for (std::size_t a = 0; a < schema.num_attributes(); ++a) {
      const AttributeSpec& spec = schema.attribute(a);
      json entry = {{"attribute", spec.name}};
      if (spec.is_categorical()) {
        std::vector<std::size_t> counts(spec.categories.size(), 0);
        for (std::size_t row : covered) ++counts[static_cast<std::size_t>(samples.value(row, a))];
        entry["kind"] = "categorical";
        entry["categories"] = spec.categories;
        entry["counts"] = counts;
      } else {
        std::vector<std::size_t> counts(10, 0);
        for (std::size_t row : covered) {
          const double q = analysis->maps.Map(a, samples.value(row, a));
          counts[std::min<std::size_t>(9, static_cast<std::size_t>(std::floor(q * 10.0)))]++;
        }
        json edges = json::array();
        for (int k = 0; k <= 10; ++k) edges.push_back(RoundedNumber(k / 10.0));
        entry["kind"] = "numeric";
        entry["quantile_edges"] = edges;
        entry["counts"] = counts;
      }
      distributions.push_back(entry);
    }
    json conditions = json::array();
    for (const auto& [attribute, condition] : rule.conditions) {
      conditions.push_back(ConditionJson(attribute, condition));
    }
    return {{"id", rid},
            {"label", schema.classes()[rule.label]},
            {"conditions", conditions},
            {"covered_samples", covered},
            {"distributions", distributions}};
  }

  json Filter(const json& body) {
    const DatasetSchema& schema = analysis->schema;
    const SampleTable& samples = analysis->samples;
    std::vector<Predicate> predicates;
    if (body.contains("predicates")) {
      if (!body["predicates"].is_array()) throw ValidationError("predicates must be a list");
      for (const json& doc : body["predicates"]) predicates.push_back(ParsePredicate(schema, doc));
    }
    std::vector<std::size_t> before(schema.num_classes(), 0);
    std::vector<std::size_t> after(schema.num_classes(), 0);
    std::vector<std::size_t> matching;
    for (std::size_t row : samples.RowsInSplit(Split::kTrain)) {
      const bool match = std::all_of(predicates.begin(), predicates.end(),
                                     [&](const Predicate& p) { return p.Matches(samples, row); });
      const int label = samples.label(row);
      if (label != kNoLabel) ++before[static_cast<std::size_t>(label)];
      if (!match) continue;
      matching.push_back(row);
      if (label != kNoLabel) ++after[static_cast<std::size_t>(label)];
    }
    filter = std::move(predicates);
    const auto distribution = [&](const std::vector<std::size_t>& counts) {
      std::size_t total = 0;
      for (std::size_t c : counts) total += c;
      json out = json::object();
      for (std::size_t c = 0; c < counts.size(); ++c) {
        const double share = total == 0 ? 0.0 : static_cast<double>(counts[c]) / total;
        out[schema.classes()[c]] = {{"count", counts[c]}, {"share", RoundedNumber(share)}};
      }
      return out;
    };
    return {{"before", distribution(before)},
            {"after", distribution(after)},
            {"matching_samples", matching}};
  }

  json Samples(const std::map<std::string, std::string>& query) const {
    const DatasetSchema& schema = analysis->schema;
    const SampleTable& samples = analysis->samples;
    std::vector<std::size_t> rows;
    for (std::size_t row : CoveredRows()) {
      if (std::all_of(filter.begin(), filter.end(),
                      [&](const Predicate& p) { return p.Matches(samples, row); })) {
        rows.push_back(row);
      }
    }
    const auto get = [&](const char* key) -> std::optional<std::string> {
      const auto it = query.find(key);
      if (it == query.end()) return std::nullopt;
      return it->second;
    };
    bool descending = false;
    if (const auto dir = get("dir")) {
      if (*dir != "asc" && *dir != "desc") throw ValidationError("dir must be 'asc' or 'desc'");
      descending = *dir == "desc";
    }
    if (const auto sort = get("sort")) {
      const auto attribute = schema.FindAttribute(*sort);
      if (!attribute) throw ValidationError("unknown sort attribute '" + *sort + "'");
      std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
        const double x = samples.value(a, *attribute);
        const double y = samples.value(b, *attribute);
        return descending ? x > y : x < y;
      });
    } else if (descending) {
      std::reverse(rows.begin(), rows.end());
    }
    const std::size_t page = get("page") ? ParseIndex(*get("page"), "page") : 0;
    const std::size_t page_size = get("page_size") ? ParseIndex(*get("page_size"), "page_size")
                                                   : service_options.sample_page_size;
    if (page_size == 0) throw ValidationError("page_size must be positive");

    json items = json::array();
    const std::size_t start = std::min(rows.size(), page * page_size);
    const std::size_t stop = std::min(rows.size(), start + page_size);
    for (std::size_t k = start; k < stop; ++k) {
      const std::size_t row = rows[k];
      json values = json::object();
      for (std::size_t a = 0; a < schema.num_attributes(); ++a) {
        const AttributeSpec& spec = schema.attribute(a);
        const double v = samples.value(row, a);
        values[spec.name] = spec.is_categorical() ? json(spec.categories[static_cast<std::size_t>(v)])
                                                  : RoundedNumber(v);
      }
      const int label = samples.label(row);
      items.push_back({{"id", row},
                       {"split", samples.split(row) == Split::kTrain ? "train" : "test"},
                       {"label", label == kNoLabel ? json() : json(schema.classes()[label])},
                       {"prediction", schema.classes()[analysis->predictions[row]]},
                       {"values", values}});
    }
    return {{"total", rows.size()},
            {"page", page},
            {"page_size", page_size},
            {"samples", items}};
  }

  json Info() const {
    const HierarchyLevel& level = hierarchy.current();
    const DatasetSchema& schema = analysis->schema;
    const SampleTable& samples = analysis->samples;
    json rule_counts = json::object();
    json sample_counts = json::object();
    std::vector<std::size_t> by_label(schema.num_classes(), 0);
    double confidence_sum = 0.0;
    std::size_t confidence_count = 0;
    double anomaly_sum = 0.0;
    for (RuleId id : level.representatives) {
      ++by_label[analysis->rules[id].label];
      anomaly_sum += analysis->scores[id];
      if (!stats[id].zero_coverage) {
        confidence_sum += stats[id].confidence;
        ++confidence_count;
      }
    }
    std::vector<std::size_t> by_class(schema.num_classes(), 0);
    std::size_t unlabelled = 0;
    const std::vector<std::size_t> covered = CoveredRows();
    for (std::size_t row : covered) {
      const int label = samples.label(row);
      if (label == kNoLabel) {
        ++unlabelled;
      } else {
        ++by_class[static_cast<std::size_t>(label)];
      }
    }
    for (std::size_t c = 0; c < schema.num_classes(); ++c) {
      rule_counts[schema.classes()[c]] = by_label[c];
      sample_counts[schema.classes()[c]] = by_class[c];
    }
    const double n = static_cast<double>(level.representatives.size());
    return {{"num_rules", level.representatives.size()},
            {"rule_counts", rule_counts},
            {"covered_samples", covered.size()},
            {"sample_counts", sample_counts},
            {"unlabelled_samples", unlabelled},
            {"mean_confidence",
             confidence_count == 0 ? json() : RoundedNumber(confidence_sum / confidence_count)},
            {"mean_anomaly_score", n == 0 ? json() : RoundedNumber(anomaly_sum / n)}};
  }

  std::string id;
  std::shared_ptr<const Analysis> analysis;
  Hierarchy hierarchy;
  ServiceOptions service_options;
  std::vector<RuleStats> stats;
  std::vector<MatrixState> states;  // one per level
  std::vector<Predicate> filter;
  std::shared_mutex mutex;
  std::atomic<std::chrono::steady_clock::rep> last_access{0};
};

Service::Service(ServiceOptions options) : options_(std::move(options)) {}

Service::~Service() = default;

void Service::Preload(std::shared_ptr<const Analysis> analysis) {
  std::lock_guard lock(mutex_);
  preloaded_ = std::move(analysis);
}

std::size_t Service::num_sessions() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

void Service::EvictIdle(std::chrono::steady_clock::time_point now) {
  std::lock_guard lock(mutex_);
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    if (now - it->second->last_used() > options_.idle_timeout) {
      it = sessions_.erase(it);
    } else {
      ++it;
    }
  }
}

Response Service::Handle(const Request& request) {
  EvictIdle(std::chrono::steady_clock::now());
  try {
    return Dispatch(request);
  } catch (const HttpError& e) {
    return {e.status(), {{"error", e.what()}}};
  } catch (const SchemaMismatchError& e) {
    return {422, {{"error", e.what()}, {"location", e.location()}}};
  } catch (const ParseError& e) {
    return {400, {{"error", e.what()}, {"location", e.location()}}};
  } catch (const ValidationError& e) {
    return {422, {{"error", e.what()}}};
  } catch (const SolverError& e) {
    return {500, {{"error", e.what()}}};
  } catch (const std::exception& e) {
    return {500, {{"error", std::string("internal error: ") + e.what()}}};
  }
}

Response Service::Dispatch(const Request& request) {
  const std::vector<std::string> parts = SplitPath(request.path);
  const bool get = request.method == "GET";
  const bool post = request.method == "POST";
  const auto method_not_allowed = [] { return Response{405, {{"error", "method not allowed"}}}; };

  if (parts.size() == 1 && parts[0] == "health") return get ? Health() : method_not_allowed();
  if (parts.empty() || parts[0] != "sessions") return {404, {{"error", "not found"}}};

  if (parts.size() == 1) {
    if (post) return CreateSession(ParseBody(request.body));
    if (!get) return method_not_allowed();
    std::lock_guard lock(mutex_);
    if (sessions_.empty()) return {404, {{"error", "no sessions"}}};
    json ids = json::array();
    for (const auto& [id, session] : sessions_) ids.push_back(id);
    return {200, {{"sessions", ids}}};
  }

  const std::shared_ptr<Session> session = FindSession(parts[1]);
  if (!session) return {404, {{"error", "unknown session '" + parts[1] + "'"}}};
  session->Touch();

  const auto read = [&](auto&& fn) -> Response {
    if (!get) return method_not_allowed();
    std::shared_lock lock(session->mutex);
    return {200, fn()};
  };
  const auto write = [&](auto&& fn) -> Response {
    if (!post) return method_not_allowed();
    std::unique_lock lock(session->mutex, std::try_to_lock);
    if (!lock.owns_lock()) return {409, {{"error", "another request is in flight"}}};
    return {200, fn(ParseBody(request.body))};
  };

  if (parts.size() == 2) return read([&] { return session->Payload(); });
  const std::string& action = parts[2];
  if (parts.size() == 3) {
    if (action == "zoom") return write([&](const json& body) { return session->Zoom(body); });
    if (action == "back") return write([&](const json&) { return session->Back(); });
    if (action == "order") return write([&](const json& body) { return session->Order(body); });
    if (action == "filter") return write([&](const json& body) { return session->Filter(body); });
    if (action == "samples") return read([&] { return session->Samples(request.query); });
    if (action == "info") return read([&] { return session->Info(); });
  }
  if (parts.size() == 4 && action == "rules") {
    return read([&] { return session->RuleDetail(parts[3]); });
  }
  return {404, {{"error", "not found"}}};
}

Response Service::Health() const {
  json model = nullptr;
  std::size_t sessions = 0;
  {
    std::lock_guard lock(mutex_);
    sessions = sessions_.size();
    if (preloaded_) {
      const Analysis& a = *preloaded_;
      model = {{"kind", a.ensemble.kind == ModelKind::kRandomForest ? "random_forest"
                                                                    : "gradient_boosting"},
               {"trees", a.ensemble.trees.size()},
               {"rules", a.rules.size()},
               {"classes", a.schema.classes()},
               {"attributes", a.schema.num_attributes()},
               {"train_samples", a.samples.RowsInSplit(Split::kTrain).size()},
               {"test_samples", a.samples.RowsInSplit(Split::kTest).size()},
               {"warnings", a.warnings}};
    }
  }
  return {200, {{"status", "ok"}, {"sessions", sessions}, {"model", model}}};
}

std::shared_ptr<const Analysis> Service::Load(const json& body) {
  const bool named = body.contains("model") || body.contains("dataset") || body.contains("schema");
  if (!named) {
    std::lock_guard lock(mutex_);
    if (!preloaded_) throw ValidationError("request must name model, dataset and schema files");
    return preloaded_;
  }
  for (const char* key : {"model", "dataset", "schema"}) {
    if (!body.contains(key) || !body[key].is_string()) {
      throw ValidationError(std::string("missing '") + key + "' path");
    }
  }
  const std::string format_name = body.value("format", std::string("json"));
  ModelFormat format;
  if (format_name == "json") {
    format = ModelFormat::kJsonInterchange;
  } else if (format_name == "gbt-text") {
    format = ModelFormat::kGbtText;
  } else {
    throw ValidationError("format must be 'json' or 'gbt-text'");
  }
  const Key key{body["model"].get<std::string>(), body["dataset"].get<std::string>(),
                body["schema"].get<std::string>(), static_cast<int>(format)};
  std::lock_guard lock(cache_mutex_);
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    it = cache_.emplace(key, LoadAnalysis(std::get<2>(key), std::get<1>(key), std::get<0>(key),
                                          format, options_.logistic))
             .first;
  }
  return it->second;
}

Response Service::CreateSession(const json& body) {
  std::shared_ptr<const Analysis> analysis = Load(body);
  HierarchyOptions options = options_.hierarchy;
  if (body.contains("m")) {
    if (!body["m"].is_number_unsigned() || body["m"].get<std::size_t>() == 0) {
      throw ValidationError("m must be a positive integer");
    }
    options.reduce.budget = body["m"].get<std::size_t>();
  }
  std::string id;
  {
    std::lock_guard lock(mutex_);
    id = "s" + std::to_string(next_id_++);
  }
  auto session = std::make_shared<Session>(id, std::move(analysis), options, options_);
  json payload = session->Payload();
  {
    std::lock_guard lock(mutex_);
    sessions_.emplace(id, session);
  }
  return {200, {{"session", id}, {"level", payload}}};
}

std::shared_ptr<Session> Service::FindSession(const std::string& id) {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

}  // namespace rulescope
