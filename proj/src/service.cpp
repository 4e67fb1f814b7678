#include "limetree/service.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <httplib.h>
#include <sodium.h>

#include "limetree/explanations.hpp"
#include "limetree/fidelity.hpp"
#include "limetree/image.hpp"
#include "limetree/sampling.hpp"

namespace limetree {

namespace fs = std::filesystem;
using nlohmann::json;

std::optional<std::string> Session::cached_render(const std::string& bits) const {
  std::lock_guard lock(render_mutex_);
  const auto it = render_cache_.find(bits);
  if (it == render_cache_.end()) return std::nullopt;
  return it->second;
}

void Session::cache_render(const std::string& bits, std::string png) {
  std::lock_guard lock(render_mutex_);
  render_cache_.emplace(bits, std::move(png));
}

void Session::clear_render_cache() {
  std::lock_guard lock(render_mutex_);
  render_cache_.clear();
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument:
    case ErrorCode::unsupported_instance: return 400;
    case ErrorCode::not_found: return 404;
    case ErrorCode::conflict: return 409;
    case ErrorCode::capacity: return 413;
    case ErrorCode::degenerate_fit: return 422;
    case ErrorCode::transport:
    case ErrorCode::protocol: return 502;
  }
  return 500;
}

namespace {

std::string now_utc() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

std::string new_session_id() {
  unsigned char raw[8];
  randombytes_buf(raw, sizeof raw);
  char hex[sizeof raw * 2 + 1];
  sodium_bin2hex(hex, sizeof hex, raw, sizeof raw);
  return hex;
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  write_file(tmp, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

std::vector<std::uint8_t> decode_payload(const json& value, const char* what) {
  require(value.is_string(), std::string(what) + " must be a base64 string");
  return base64_decode(value.get<std::string>());
}

OcclusionStrategy parse_occlusion(const json& j) {
  if (j.is_null()) return OcclusionStrategy::solid();
  const std::string kind = j.value("kind", std::string("solid-color"));
  if (kind == "per-segment-mean") return OcclusionStrategy::mean();
  require(kind == "solid-color", "unknown occlusion kind '" + kind + "'");
  Rgb color{0, 0, 0};
  if (j.contains("rgb") && !j.at("rgb").is_null()) {
    const auto rgb = j.at("rgb").get<std::vector<int>>();
    require(rgb.size() == 3, "occlusion rgb needs three components");
    for (int v : rgb) require(v >= 0 && v <= 255, "occlusion rgb components must lie in 0..255");
    color = {static_cast<std::uint8_t>(rgb[0]), static_cast<std::uint8_t>(rgb[1]), static_cast<std::uint8_t>(rgb[2])};
  }
  return OcclusionStrategy::solid(color);
}

SegmentGroups parse_groups(const json& j) {
  SegmentGroups groups;
  for (const auto& g : j) {
    const auto members = g.get<std::vector<std::size_t>>();
    groups.emplace_back(members.begin(), members.end());
  }
  return groups;
}

InterpretableDomain replay_merges(InterpretableDomain domain, const json& history) {
  for (const auto& step : history) domain = domain.merged(parse_groups(step));
  return domain;
}

const std::vector<TreeVariant>& variant_order() {
  static const std::vector<TreeVariant> order{TreeVariant::greedy, TreeVariant::relabeled, TreeVariant::complete};
  return order;
}

std::string render_url(const std::string& id, const InterpretablePoint& p) {
  return "/sessions/" + id + "/render/" + p.to_string() + ".png";
}

// Reference to the instance behind a point: a render URL for images, the
// surviving text for token domains.
json visual(const SessionState& s, const InterpretablePoint& p) {
  if (s.domain.kind() == DomainKind::image_occlusion) return {{"render", render_url(s.id, p)}};
  return {{"text", std::get<TokenSequence>(s.domain.from_interpretable(p)).joined()}};
}

json session_summary(const SessionState& s, bool busy) {
  json variants = json::array();
  for (const auto& [v, tree] : s.trees) variants.push_back(to_string(v));
  if (s.lime) variants.push_back("lime");
  json j{{"id", s.id},
         {"created", s.created},
         {"updated", s.updated},
         {"d", s.domain.dimension()},
         {"kind", to_string(s.domain.kind())},
         {"domain", s.domain.to_json()},
         {"black_box", s.black_box_descriptor},
         {"class_count", s.black_box->class_count()},
         {"class_names", s.black_box->class_names()},
         {"fitted", variants},
         {"fit_settings", s.fit_settings},
         {"reports", s.reports},
         {"busy", busy}};
  if (s.domain.kind() == DomainKind::text_deletion)
    j["tokens"] = std::get<TokenSequence>(s.domain.anchor()).tokens;
  else
    j["size"] = {{"width", s.domain.segmentation().width()}, {"height", s.domain.segmentation().height()}};
  return j;
}

class WriteGuard {
 public:
  explicit WriteGuard(Session& session) : session_(session) {
    if (!session_.try_begin_write())
      fail(ErrorCode::conflict, "session " + session_.state().id + " has a fit or segmentation update in flight");
  }
  ~WriteGuard() { session_.end_write(); }
  WriteGuard(const WriteGuard&) = delete;
  WriteGuard& operator=(const WriteGuard&) = delete;

 private:
  Session& session_;
};

const SurrogateTree& pick_tree(const SessionState& s, const json& request) {
  if (s.trees.empty()) fail(ErrorCode::conflict, "session " + s.id + " has no fitted surrogate; POST /fit first");
  if (request.contains("variant") && !request.at("variant").is_null()) {
    const TreeVariant v = parse_tree_variant(request.at("variant").get<std::string>());
    const auto it = s.trees.find(v);
    if (it == s.trees.end()) fail(ErrorCode::conflict, "variant " + to_string(v) + " has not been fitted");
    return it->second;
  }
  for (TreeVariant v : variant_order())
    if (s.trees.contains(v)) return s.trees.at(v);
  return s.trees.begin()->second;
}

InterpretablePoint parse_point(const json& j, std::size_t d) {
  InterpretablePoint p;
  if (j.is_string())
    p = InterpretablePoint::from_string(j.get<std::string>());
  else
    p = InterpretablePoint(j.get<std::vector<std::uint8_t>>());
  require(p.size() == d, "point length " + std::to_string(p.size()) + " does not match d=" + std::to_string(d));
  return p;
}

Oracle requested_oracle(const json& request, const SurrogateTree& tree) {
  if (request.contains("oracle") && !request.at("oracle").is_null())
    return parse_oracle(request.at("oracle").get<std::string>());
  return default_oracle(tree);
}

std::size_t requested_leaf(const json& request, const SurrogateTree& tree) {
  if (request.contains("leaf")) {
    const auto leaf = request.at("leaf").get<std::size_t>();
    require(tree.is_leaf(leaf), "node " + std::to_string(leaf) + " is not a leaf");
    return leaf;
  }
  if (request.contains("point")) return tree.leaf_of(parse_point(request.at("point"), tree.dimension()));
  return tree.leaf_of(InterpretablePoint::ones(tree.dimension()));
}

LinearSurrogate surrogate_from_json(const json& j) {
  LinearSurrogate s;
  s.class_index = j.at("class").get<std::size_t>();
  s.alpha = j.at("alpha").get<double>();
  s.intercept = j.at("intercept").get<double>();
  s.coefficients = j.at("coefficients").get<std::vector<double>>();
  return s;
}

}  // namespace

ExplanationService::ExplanationService(fs::path root) : root_(std::move(root)) {
  if (sodium_init() < 0) fail(ErrorCode::invalid_argument, "libsodium failed to initialise");
  fs::create_directories(root_);
  load_all();
}

std::shared_ptr<Session> ExplanationService::session(const std::string& id) const {
  std::lock_guard lock(sessions_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) fail(ErrorCode::not_found, "no session with id '" + id + "'");
  return it->second;
}

json ExplanationService::create_session(const json& request) {
  require(request.is_object(), "request body must be a JSON object");
  const json& instance = request.at("instance");
  std::optional<InterpretableDomain> domain;
  if (instance.contains("image")) {
    RgbImage image = decode_rgb_image(decode_payload(instance.at("image"), "instance.image"));
    const json seg = request.value("segmentation", json(nullptr));
    require(seg.is_object(), "image sessions need a segmentation: {\"grid\":{rows,cols}} or {\"mask\":<base64 png>}");
    std::optional<Segmentation> segmentation;
    if (seg.contains("grid")) {
      const auto& g = seg.at("grid");
      segmentation = build_grid_segmentation(image.width(), image.height(), g.at("rows").get<std::size_t>(),
                                             g.at("cols").get<std::size_t>());
    } else {
      const LabelImage mask = decode_label_image(decode_payload(seg.at("mask"), "segmentation.mask"));
      require(mask.width == image.width() && mask.height == image.height(),
              "mask size " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                  " differs from the image size " + std::to_string(image.width()) + "x" +
                  std::to_string(image.height()));
      segmentation = Segmentation(mask);
    }
    domain = InterpretableDomain::image(std::move(image), std::move(*segmentation),
                                        parse_occlusion(request.value("occlusion", json(nullptr))));
  } else if (instance.contains("tokens")) {
    domain = InterpretableDomain::tokens(instance.at("tokens").get<std::vector<std::string>>());
  } else if (instance.contains("text")) {
    const auto text = instance.at("text").get<std::string>();
    if (instance.contains("spans"))
      domain = InterpretableDomain::text(text, instance.at("spans").get<std::vector<std::pair<std::size_t, std::size_t>>>());
    else
      domain = InterpretableDomain::text(text);
  } else {
    fail(ErrorCode::invalid_argument, "instance needs one of: image, text, tokens");
  }

  const json descriptor = request.at("black_box");
  BlackBoxPtr black_box = make_black_box(descriptor, *domain);
  require(black_box->class_count() >= 2, "black boxes need at least 2 classes");
  // Probe once so unreachable or misbehaving models fail at creation.
  const Matrix anchor = black_box->predict_batch(std::span(&domain->anchor(), 1));

  const std::string stamp = now_utc();
  SessionState state{new_session_id(), stamp, stamp, *domain, *domain, descriptor, black_box, {}, {}, json::object(),
                     nullptr};
  persist(state);
  auto session = std::make_shared<Session>(std::move(state));
  const SessionState& s = session->state();
  json response{{"id", s.id},
                {"d", s.domain.dimension()},
                {"kind", to_string(s.domain.kind())},
                {"injectivity_violations", s.domain.injectivity_violations()},
                {"class_count", s.black_box->class_count()},
                {"anchor_probabilities", std::vector<double>(anchor.row(0).begin(), anchor.row(0).end())}};
  std::lock_guard lock(sessions_mutex_);
  sessions_.emplace(s.id, std::move(session));
  return response;
}

json ExplanationService::get_session(const std::string& id) const {
  auto s = session(id);
  std::shared_lock lock(s->mutex());
  return session_summary(s->state(), s->busy());
}

json ExplanationService::list_sessions() const {
  std::lock_guard lock(sessions_mutex_);
  json out = json::array();
  for (const auto& [id, s] : sessions_) {
    std::shared_lock slock(s->mutex());
    out.push_back({{"id", id}, {"d", s->state().domain.dimension()}, {"kind", to_string(s->state().domain.kind())}});
  }
  return {{"sessions", out}};
}

json ExplanationService::update_segmentation(const std::string& id, const json& request) {
  auto s = session(id);
  WriteGuard guard(*s);
  const SegmentGroups groups = parse_groups(request.at("groups"));
  std::unique_lock lock(s->mutex());
  SessionState& state = s->state();
  InterpretableDomain next = state.domain.merged(groups);
  const bool changed = next.dimension() != state.domain.dimension();
  if (!changed) return {{"d", state.domain.dimension()}, {"invalidated", false}};
  // Invalidate before acknowledging so no query can see a stale surrogate.
  state.domain = std::move(next);
  state.trees.clear();
  state.lime.reset();
  state.reports = json::object();
  state.fit_settings = nullptr;
  state.updated = now_utc();
  s->clear_render_cache();
  persist(state);
  return {{"d", state.domain.dimension()},
          {"invalidated", true},
          {"injectivity_violations", state.domain.injectivity_violations()}};
}

json ExplanationService::fit(const std::string& id, const json& request) {
  auto s = session(id);
  WriteGuard guard(*s);

  InterpretableDomain domain = [&] {
    std::shared_lock lock(s->mutex());
    return s->state().domain;
  }();
  BlackBoxPtr black_box = s->state().black_box;
  const std::size_t d = domain.dimension();

  std::vector<std::size_t> classes;
  if (request.contains("classes")) {
    classes = request.at("classes").get<std::vector<std::size_t>>();
    require(!classes.empty(), "classes must not be empty");
    for (auto c : classes) require(c < black_box->class_count(), "class " + std::to_string(c) + " is out of range");
  } else {
    const std::size_t top = std::min(request.value("top", std::size_t{3}), black_box->class_count());
    require(top >= 1, "top must be at least 1");
    classes = top_classes(*black_box, domain, top);
  }
  const double epsilon = request.value("epsilon", 0.95);
  const std::size_t depth_cap = request.value("depth_cap", d);
  SamplingOptions sampling;
  sampling.samples = request.value("samples", std::size_t{1000});
  sampling.seed = request.value("seed", std::uint64_t{0});
  sampling.kernel_width = request.value("kernel_width", kDefaultKernelWidth);
  const double alpha = request.value("alpha", kDefaultRidgeAlpha);
  std::vector<std::string> requested = request.value("variants", std::vector<std::string>{"limet"});
  std::set<std::string> variants;
  for (const auto& name : requested) {
    if (name == "lime") {
      variants.insert("lime");
      continue;
    }
    variants.insert(to_string(parse_tree_variant(name)));
  }
  require(!variants.empty(), "at least one variant must be requested");

  const WeightedSample sample = build_sample(d, sampling);
  const Matrix targets = predict_points(*black_box, domain, sample.points, classes);

  std::map<TreeVariant, SurrogateTree> trees;
  std::optional<LimeExplanation> lime;
  json reports = json::object();
  const bool need_greedy = variants.contains(to_string(TreeVariant::greedy)) ||
                           variants.contains(to_string(TreeVariant::relabeled));
  if (need_greedy) {
    const LimetreeFit fitted = fit_limetree(sample, targets, classes, epsilon, depth_cap);
    if (variants.contains(to_string(TreeVariant::greedy))) {
      const auto fidelity = verify_fidelity(fitted.tree, *black_box, domain, FidelityScope::minimal_set);
      reports[to_string(TreeVariant::greedy)] = {{"fit", fitted.report.to_json()},
                                                 {"fidelity", fidelity.to_json()},
                                                 {"certified", fidelity.certified},
                                                 {"depth", fitted.tree.depth()},
                                                 {"width", fitted.tree.width()}};
      trees.emplace(TreeVariant::greedy, fitted.tree);
    }
    if (variants.contains(to_string(TreeVariant::relabeled))) {
      SurrogateTree relabeled = relabel_leaves(fitted.tree, *black_box, domain);
      const auto fidelity = verify_fidelity(relabeled, *black_box, domain, FidelityScope::minimal_set);
      const double loss = loss_limetree(targets, relabeled.predict_all(sample.points), sample.weights, classes.size() > 1);
      reports[to_string(TreeVariant::relabeled)] = {{"loss", loss},
                                                    {"fidelity", fidelity.to_json()},
                                                    {"certified", fidelity.certified},
                                                    {"guarantee_degraded", relabeled.meta().guarantee_degraded},
                                                    {"depth", relabeled.depth()},
                                                    {"width", relabeled.width()}};
      trees.emplace(TreeVariant::relabeled, std::move(relabeled));
    }
  }
  if (variants.contains(to_string(TreeVariant::complete))) {
    SurrogateTree complete = fit_complete(*black_box, domain, classes);
    const auto fidelity = verify_fidelity(complete, *black_box, domain, FidelityScope::full_enumeration);
    const auto eval = weigh_points(enumerate_domain(d), sampling.kernel_width);
    const Matrix truth = predict_points(*black_box, domain, eval.points, classes);
    const double loss = loss_limetree(truth, complete.predict_all(eval.points), eval.weights, classes.size() > 1);
    reports[to_string(TreeVariant::complete)] = {{"loss", loss},
                                                 {"fidelity", fidelity.to_json()},
                                                 {"certified", fidelity.certified},
                                                 {"guarantee_degraded", complete.meta().guarantee_degraded},
                                                 {"depth", complete.depth()},
                                                 {"width", complete.width()}};
    trees.emplace(TreeVariant::complete, std::move(complete));
  }
  if (variants.contains("lime")) {
    lime = lime_explain(sample, targets, classes, alpha);
    const double loss = loss_limetree(targets, lime->predict_all(sample.points), sample.weights, classes.size() > 1);
    json per_class = json::array();
    for (std::size_t c = 0; c < classes.size(); ++c) {
      std::vector<double> g;
      for (const auto& p : sample.points) g.push_back(lime->surrogates[c].predict(p));
      per_class.push_back(loss_lime(targets.column(c), g, sample.weights));
    }
    reports["lime"] = {{"loss", loss}, {"lime_loss", per_class}, {"certified", false}};
  }

  const json settings{{"classes", classes},       {"epsilon", epsilon},
                      {"depth_cap", depth_cap},   {"samples", sampling.samples},
                      {"seed", sampling.seed},    {"kernel_width", sampling.kernel_width},
                      {"alpha", alpha},           {"variants", std::vector<std::string>(variants.begin(), variants.end())},
                      {"enumerated", sample.enumerated}};
  std::unique_lock lock(s->mutex());
  SessionState& state = s->state();
  state.trees = std::move(trees);
  state.lime = std::move(lime);
  state.reports = reports;
  state.fit_settings = settings;
  state.updated = now_utc();
  persist(state);
  return {{"reports", reports}, {"classes", classes}, {"settings", settings}};
}

json ExplanationService::query(const std::string& id, const json& request) const {
  auto s = session(id);
  std::shared_lock lock(s->mutex());
  const SessionState& state = s->state();
  const std::string kind = request.at("kind").get<std::string>();
  const BlackBox* bb = state.black_box.get();

  if (kind == "lime") {
    if (!state.lime) fail(ErrorCode::conflict, "the LIME baseline has not been fitted");
    return state.lime->to_json();
  }
  const SurrogateTree& tree = pick_tree(state, request);
  json out;
  if (kind == "importance") {
    const auto values = feature_importance(tree);
    const bool no_splits = tree.width() == 1;
    out = {{"kind", "importance"}, {"values", values}, {"no_splits", no_splits}};
  } else if (kind == "rule") {
    const Rule rule = extract_rule(tree, requested_leaf(request, tree));
    out = rule.to_json();
    out["visual"] = visual(state, rule.minimal_point);
  } else if (kind == "exemplars") {
    const std::size_t radius = request.value("radius", std::size_t{1});
    const ClassFilter filter = parse_class_filter(request.value("filter", std::string("any")));
    const bool enumerate = request.value("enumerate", tree.dimension() <= 12);
    out = exemplars(tree, requested_leaf(request, tree), radius, filter, enumerate).to_json();
  } else if (kind == "what-if") {
    const InterpretablePoint point =
        request.contains("point") ? parse_point(request.at("point"), tree.dimension()) : InterpretablePoint::ones(tree.dimension());
    const WhatIfResult r = what_if(point, requested_oracle(request, tree), tree, state.domain, bb);
    out = r.to_json();
    out["visual"] = visual(state, point);
  } else if (kind == "counterfactual") {
    CounterfactualQuery q = CounterfactualQuery::from_json(request);
    q.oracle = requested_oracle(request, tree);
    const CounterfactualResult r = counterfactual(q, tree, state.domain, bb);
    out = r.to_json();
    json visuals = json::array();
    for (const auto& p : r.points) visuals.push_back(visual(state, p));
    out["visuals"] = visuals;
  } else if (kind == "shortest") {
    const ShortestResult r = shortest_explanation(request.at("class").get<std::size_t>(), tree, state.domain, bb,
                                                  requested_oracle(request, tree));
    out = r.to_json();
    json visuals = json::array();
    for (const auto& p : r.points) visuals.push_back(visual(state, p));
    out["visuals"] = visuals;
  } else if (kind == "tree") {
    return this->tree(id, request.contains("variant") ? std::optional(request.at("variant").get<std::string>())
                                                      : std::nullopt);
  } else {
    fail(ErrorCode::invalid_argument, "unknown explanation kind '" + kind + "'");
  }
  out["variant"] = to_string(tree.meta().variant);
  return out;
}

json ExplanationService::tree(const std::string& id, const std::optional<std::string>& variant) const {
  auto s = session(id);
  std::shared_lock lock(s->mutex());
  const SessionState& state = s->state();
  json selector = json::object();
  if (variant) selector["variant"] = *variant;
  const SurrogateTree& t = pick_tree(state, selector);
  auto thumbnail = [&](const InterpretablePoint& p) -> std::string {
    if (state.domain.kind() == DomainKind::image_occlusion) return render_url(id, p);
    return std::get<TokenSequence>(state.domain.from_interpretable(p)).joined();
  };
  json doc = render_tree(t, state.domain, thumbnail);
  doc["class_names"] = [&] {
    json names = json::array();
    const auto all = state.black_box->class_names();
    for (auto c : t.classes()) names.push_back(c < all.size() ? all[c] : "class_" + std::to_string(c));
    return names;
  }();
  return doc;
}

std::string ExplanationService::render_png(const std::string& id, const std::string& bits) const {
  auto s = session(id);
  std::shared_lock lock(s->mutex());
  const SessionState& state = s->state();
  require(state.domain.kind() == DomainKind::image_occlusion, "text sessions have no rendered images");
  const InterpretablePoint point = InterpretablePoint::from_string(bits);
  require(point.size() == state.domain.dimension(),
          "bitstring length " + std::to_string(bits.size()) + " does not match d=" +
              std::to_string(state.domain.dimension()));
  if (auto cached = s->cached_render(bits)) return *cached;
  const auto png = encode_png(std::get<RgbImage>(state.domain.from_interpretable(point)));
  std::string bytes(png.begin(), png.end());
  s->cache_render(bits, bytes);
  return bytes;
}

std::map<std::string, std::string> ExplanationService::tree_files(const std::string& id) const {
  auto s = session(id);
  std::shared_lock lock(s->mutex());
  std::map<std::string, std::string> out;
  const fs::path dir = root_ / id / "trees";
  if (!fs::exists(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".json") out[entry.path().stem().string()] = read_text(entry.path());
  return out;
}

void ExplanationService::persist(const SessionState& s) const {
  const fs::path dir = root_ / s.id;
  fs::create_directories(dir);
  const json domain = s.domain.to_json();
  json session{{"id", s.id},
               {"created", s.created},
               {"updated", s.updated},
               {"kind", domain.at("kind")},
               {"occlusion", domain.at("occlusion")},
               {"merge_history", domain.at("merge_history")},
               {"black_box", s.black_box_descriptor},
               {"fit_settings", s.fit_settings}};
  if (s.base.kind() == DomainKind::image_occlusion) {
    if (!fs::exists(dir / "anchor.png")) write_file(dir / "anchor.png", encode_png(std::get<RgbImage>(s.base.anchor())));
    if (!fs::exists(dir / "mask.png"))
      write_file(dir / "mask.png", encode_label_png(s.base.segmentation().to_label_image()));
  } else if (!fs::exists(dir / "text.json")) {
    write_text(dir / "text.json", json{{"tokens", std::get<TokenSequence>(s.base.anchor()).tokens}}.dump(2));
  }
  const fs::path trees = dir / "trees";
  fs::remove_all(trees);
  fs::create_directories(trees);
  for (const auto& [variant, tree] : s.trees) write_text(trees / (to_string(variant) + ".json"), tree.to_json().dump());
  if (s.lime)
    write_text(dir / "lime.json", s.lime->to_json().dump());
  else
    fs::remove(dir / "lime.json");
  write_text(dir / "reports.json", s.reports.dump(2));
  write_text(dir / "session.json", session.dump(2));
}

std::shared_ptr<Session> ExplanationService::load(const fs::path& dir) {
  const json meta = json::parse(read_text(dir / "session.json"));
  std::optional<InterpretableDomain> base;
  if (meta.at("kind").get<std::string>() == to_string(DomainKind::image_occlusion)) {
    base = InterpretableDomain::image(read_rgb_image(dir / "anchor.png"), Segmentation(read_label_image(dir / "mask.png")),
                                      parse_occlusion(meta.at("occlusion")));
  } else {
    base = InterpretableDomain::tokens(json::parse(read_text(dir / "text.json")).at("tokens").get<std::vector<std::string>>());
  }
  InterpretableDomain domain = replay_merges(*base, meta.at("merge_history"));
  const json descriptor = meta.at("black_box");
  BlackBoxPtr black_box = make_black_box(descriptor, *base);
  SessionState state{meta.at("id").get<std::string>(),
                     meta.at("created").get<std::string>(),
                     meta.at("updated").get<std::string>(),
                     *base,
                     std::move(domain),
                     descriptor,
                     std::move(black_box),
                     {},
                     {},
                     json::object(),
                     meta.value("fit_settings", json(nullptr))};
  if (fs::exists(dir / "trees"))
    for (const auto& entry : fs::directory_iterator(dir / "trees")) {
      if (entry.path().extension() != ".json") continue;
      SurrogateTree tree = SurrogateTree::from_json(json::parse(read_text(entry.path())));
      state.trees.emplace(tree.meta().variant, std::move(tree));
    }
  if (fs::exists(dir / "lime.json")) {
    LimeExplanation lime;
    for (const auto& s : json::parse(read_text(dir / "lime.json")).at("surrogates"))
      lime.surrogates.push_back(surrogate_from_json(s));
    state.lime = std::move(lime);
  }
  if (fs::exists(dir / "reports.json")) state.reports = json::parse(read_text(dir / "reports.json"));
  return std::make_shared<Session>(std::move(state));
}

void ExplanationService::load_all() {
  for (const auto& entry : fs::directory_iterator(root_)) {
    if (!entry.is_directory() || !fs::exists(entry.path() / "session.json")) continue;
    auto session = load(entry.path());
    const std::string id = session->state().id;
    sessions_.emplace(id, std::move(session));
  }
}

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  send_json(res, {{"error", code}, {"message", message}}, status);
}

template <typename Handler>
httplib::Server::Handler guarded(Handler handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const TransportError& e) {
      send_json(res,
                {{"error", to_string(e.code())},
                 {"message", e.what()},
                 {"attempts", e.attempts()},
                 {"upstream_status", e.http_status()},
                 {"retryable", e.retryable()}},
                http_status(e.code()));
    } catch (const Error& e) {
      send_error(res, http_status(e.code()), to_string(e.code()), e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, to_string(ErrorCode::invalid_argument), std::string("malformed request: ") + e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal-error", e.what());
    }
  };
}

json body_of(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  return json::parse(req.body);
}

}  // namespace

void ExplanationService::mount(httplib::Server& server) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
               send_json(res, list_sessions());
             }));
  server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
                send_json(res, create_session(body_of(req)), 201);
              }));
  server.Get(R"(/sessions/([0-9a-f]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
               send_json(res, get_session(req.matches[1]));
             }));
  server.Put(R"(/sessions/([0-9a-f]+)/segmentation)",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               send_json(res, update_segmentation(req.matches[1], body_of(req)));
             }));
  server.Post(R"(/sessions/([0-9a-f]+)/fit)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                send_json(res, fit(req.matches[1], body_of(req)));
              }));
  server.Post(R"(/sessions/([0-9a-f]+)/query)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                send_json(res, query(req.matches[1], body_of(req)));
              }));
  server.Get(R"(/sessions/([0-9a-f]+)/tree)", guarded([this](const httplib::Request& req, httplib::Response& res) {
               std::optional<std::string> variant;
               if (req.has_param("variant")) variant = req.get_param_value("variant");
               send_json(res, tree(req.matches[1], variant));
             }));
  server.Get(R"(/sessions/([0-9a-f]+)/render/([^/]+)\.png)",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               const std::string png = render_png(req.matches[1], req.matches[2]);
               res.set_header("Cache-Control", "max-age=3600");
               res.set_content(png, "image/png");
             }));
}

}  // namespace limetree
