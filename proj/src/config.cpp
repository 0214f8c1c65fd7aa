#include "seuss/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace seuss {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) {
    if (!out.empty()) out += "; ";
    out += s;
  }
  return out;
}

const char* kind_name(const json& j) {
  if (j.is_object()) return "object";
  if (j.is_array()) return "array";
  if (j.is_string()) return "string";
  if (j.is_boolean()) return "boolean";
  if (j.is_number_integer() || j.is_number_unsigned()) return "integer";
  if (j.is_number_float()) return "number";
  if (j.is_null()) return "null";
  return "value";
}

bool compatible(const json& def, const json& user) {
  if (def.is_object()) return user.is_object();
  if (def.is_string()) return user.is_string();
  if (def.is_boolean()) return user.is_boolean();
  if (def.is_number_unsigned())
    return user.is_number_unsigned() || (user.is_number_integer() && user.get<std::int64_t>() >= 0);
  if (def.is_number_integer()) return user.is_number_integer() || user.is_number_unsigned();
  if (def.is_number_float()) return user.is_number();
  return false;
}

// Overlays `user` onto `def`, recording unknown keys and type mismatches.
void overlay(json& def, const json& user, const std::string& path,
             std::vector<std::string>& problems) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string here = path.empty() ? it.key() : path + "." + it.key();
    if (!def.contains(it.key())) {
      problems.push_back(here + ": unknown key");
      continue;
    }
    json& slot = def[it.key()];
    if (!compatible(slot, *it)) {
      problems.push_back(here + ": expected " + kind_name(slot) + ", got " + kind_name(*it));
      continue;
    }
    if (slot.is_object())
      overlay(slot, *it, here, problems);
    else
      slot = *it;
  }
}

json to_json(const RunConfig& c) {
  const NodeConfig& n = c.node;
  const CostModel& cm = n.cost;
  const ContainerModel& k = n.containers;
  const BurstSpec& b = c.burst.spec;
  json j;
  j["backend"] = to_string(c.backend);
  j["seed"] = c.seed;
  j["node"] = {
      {"worker_cores", n.worker_cores},
      {"memory_gib", static_cast<double>(n.memory_bytes) / static_cast<double>(1ULL << 30)},
      {"oom_threshold_fraction", n.oom_threshold_fraction},
      {"hot_tub_capacity_per_core", static_cast<std::uint64_t>(n.hot_tub_capacity_per_core)},
      {"page_size", static_cast<std::uint64_t>(n.page_size)},
      {"anticipatory",
       {{"runtime_id", n.anticipatory.runtime_id},
        {"image_pages", static_cast<std::uint64_t>(n.anticipatory.image_pages)},
        {"warmup_enabled", n.anticipatory.warmup_enabled},
        {"warmup_pages", static_cast<std::uint64_t>(n.anticipatory.warmup_pages)},
        {"unwarmed_page_factor", n.anticipatory.unwarmed_page_factor}}},
      {"functions",
       {{"source_pages", n.functions.source_pages},
        {"exec_pages", n.functions.exec_pages},
        {"hot_exec_pages", n.functions.hot_exec_pages}}}};
  j["cost_model"] = {{"hot_overhead_ms", cm.hot_overhead_ms},
                     {"warm_overhead_ms", cm.warm_overhead_ms},
                     {"cold_overhead_ms", cm.cold_overhead_ms},
                     {"uc_deploy_ms", cm.uc_deploy_ms},
                     {"snapshot_capture_ms", cm.snapshot_capture_ms},
                     {"control_plane_latency_ms", cm.control_plane_latency_ms},
                     {"control_plane_peak_rps", cm.control_plane_peak_rps},
                     {"shim_extra_rtt_ms", cm.shim_extra_rtt_ms},
                     {"shim_serial_ms", cm.shim_serial_ms}};
  j["container_model"] = {{"create_base_ms", k.create_base_ms},
                          {"create_per_instance_ms", k.create_per_instance_ms},
                          {"create_per_concurrent_ms", k.create_per_concurrent_ms},
                          {"delete_factor", k.delete_factor},
                          {"jitter_sigma", k.jitter_sigma},
                          {"unpause_ms", k.unpause_ms},
                          {"hot_ms", k.hot_ms},
                          {"import_compile_ms", k.import_compile_ms},
                          {"density_limit", k.density_limit},
                          {"cache_limit", k.cache_limit},
                          {"bridge_capacity", k.bridge_capacity},
                          {"prewarm_parallelism", k.prewarm_parallelism},
                          {"microvm_create_ms", k.microvm_create_ms},
                          {"microvm_density", k.microvm_density},
                          {"container_footprint_kib", k.container_footprint_kib}};
  j["throughput"] = {{"n", c.throughput.n},
                     {"m_start", c.throughput.m_start},
                     {"m_end", c.throughput.m_end},
                     {"concurrency", c.throughput.concurrency},
                     {"prewarm_pool_size", c.throughput.prewarm_pool_size}};
  j["burst"] = {{"period_s", b.period_s},
                {"count", b.count},
                {"burst_size", b.burst_size},
                {"cpu_ms", b.cpu_ms},
                {"background_threads", b.background_threads},
                {"background_functions", b.background_functions},
                {"io_wait_ms", b.io_wait_ms},
                {"rate_cap_rps", b.rate_cap_rps},
                {"control_plane_burst", c.burst.control_plane_burst},
                {"prewarm_pool_size", c.burst.prewarm_pool_size}};
  j["density"] = {{"memory_gib", c.density.memory_gib},
                  {"process_footprint_kib", c.density.process_footprint_kib},
                  {"container_footprint_kib", c.density.container_footprint_kib},
                  {"microvm_footprint_kib", c.density.microvm_footprint_kib},
                  {"process_limit", c.density.process_limit}};
  j["output"] = {{"dir", c.output.dir}, {"sample_interval_ms", c.output.sample_interval_ms}};
  return j;
}

RunConfig from_json(const json& j) {
  RunConfig c;
  NodeConfig& n = c.node;
  const json& jn = j.at("node");
  c.backend = parse_backend(j.at("backend").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  n.worker_cores = jn.at("worker_cores").get<int>();
  n.memory_bytes = gib_to_bytes(jn.at("memory_gib").get<double>());
  n.oom_threshold_fraction = jn.at("oom_threshold_fraction").get<double>();
  n.hot_tub_capacity_per_core = jn.at("hot_tub_capacity_per_core").get<std::uint64_t>();
  n.page_size = jn.at("page_size").get<std::uint64_t>();
  const json& ja = jn.at("anticipatory");
  n.anticipatory.runtime_id = ja.at("runtime_id").get<std::string>();
  n.anticipatory.image_pages = ja.at("image_pages").get<std::uint64_t>();
  n.anticipatory.warmup_enabled = ja.at("warmup_enabled").get<bool>();
  n.anticipatory.warmup_pages = ja.at("warmup_pages").get<std::uint64_t>();
  n.anticipatory.unwarmed_page_factor = ja.at("unwarmed_page_factor").get<std::uint32_t>();
  const json& jf = jn.at("functions");
  n.functions.source_pages = jf.at("source_pages").get<std::uint32_t>();
  n.functions.exec_pages = jf.at("exec_pages").get<std::uint32_t>();
  n.functions.hot_exec_pages = jf.at("hot_exec_pages").get<std::uint32_t>();

  const json& jc = j.at("cost_model");
  CostModel& cm = n.cost;
  cm.hot_overhead_ms = jc.at("hot_overhead_ms").get<double>();
  cm.warm_overhead_ms = jc.at("warm_overhead_ms").get<double>();
  cm.cold_overhead_ms = jc.at("cold_overhead_ms").get<double>();
  cm.uc_deploy_ms = jc.at("uc_deploy_ms").get<double>();
  cm.snapshot_capture_ms = jc.at("snapshot_capture_ms").get<double>();
  cm.control_plane_latency_ms = jc.at("control_plane_latency_ms").get<double>();
  cm.control_plane_peak_rps = jc.at("control_plane_peak_rps").get<double>();
  cm.shim_extra_rtt_ms = jc.at("shim_extra_rtt_ms").get<double>();
  cm.shim_serial_ms = jc.at("shim_serial_ms").get<double>();

  const json& jk = j.at("container_model");
  ContainerModel& k = n.containers;
  k.create_base_ms = jk.at("create_base_ms").get<double>();
  k.create_per_instance_ms = jk.at("create_per_instance_ms").get<double>();
  k.create_per_concurrent_ms = jk.at("create_per_concurrent_ms").get<double>();
  k.delete_factor = jk.at("delete_factor").get<double>();
  k.jitter_sigma = jk.at("jitter_sigma").get<double>();
  k.unpause_ms = jk.at("unpause_ms").get<double>();
  k.hot_ms = jk.at("hot_ms").get<double>();
  k.import_compile_ms = jk.at("import_compile_ms").get<double>();
  k.density_limit = jk.at("density_limit").get<std::uint32_t>();
  k.cache_limit = jk.at("cache_limit").get<std::uint32_t>();
  k.bridge_capacity = jk.at("bridge_capacity").get<std::uint32_t>();
  k.prewarm_parallelism = jk.at("prewarm_parallelism").get<std::uint32_t>();
  k.microvm_create_ms = jk.at("microvm_create_ms").get<double>();
  k.microvm_density = jk.at("microvm_density").get<std::uint32_t>();
  k.container_footprint_kib = jk.at("container_footprint_kib").get<std::uint64_t>();

  const json& jt = j.at("throughput");
  c.throughput.n = jt.at("n").get<std::uint64_t>();
  c.throughput.m_start = jt.at("m_start").get<std::uint64_t>();
  c.throughput.m_end = jt.at("m_end").get<std::uint64_t>();
  c.throughput.concurrency = jt.at("concurrency").get<int>();
  c.throughput.prewarm_pool_size = jt.at("prewarm_pool_size").get<std::uint32_t>();

  const json& jb = j.at("burst");
  BurstSpec& b = c.burst.spec;
  b.period_s = jb.at("period_s").get<double>();
  b.count = jb.at("count").get<int>();
  b.burst_size = jb.at("burst_size").get<int>();
  b.cpu_ms = jb.at("cpu_ms").get<double>();
  b.background_threads = jb.at("background_threads").get<int>();
  b.background_functions = jb.at("background_functions").get<int>();
  b.io_wait_ms = jb.at("io_wait_ms").get<double>();
  b.rate_cap_rps = jb.at("rate_cap_rps").get<double>();
  c.burst.control_plane_burst = jb.at("control_plane_burst").get<std::uint32_t>();
  c.burst.prewarm_pool_size = jb.at("prewarm_pool_size").get<std::uint32_t>();

  const json& jd = j.at("density");
  c.density.memory_gib = jd.at("memory_gib").get<double>();
  c.density.process_footprint_kib = jd.at("process_footprint_kib").get<std::uint64_t>();
  c.density.container_footprint_kib = jd.at("container_footprint_kib").get<std::uint64_t>();
  c.density.microvm_footprint_kib = jd.at("microvm_footprint_kib").get<std::uint64_t>();
  c.density.process_limit = jd.at("process_limit").get<std::uint32_t>();

  const json& jo = j.at("output");
  c.output.dir = jo.at("dir").get<std::string>();
  c.output.sample_interval_ms = jo.at("sample_interval_ms").get<double>();
  return c;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error("invalid configuration: " + join(problems)),
      problems_(std::move(problems)) {}

std::uint64_t gib_to_bytes(double gib) {
  return static_cast<std::uint64_t>(std::llround(gib * static_cast<double>(1ULL << 30)));
}

void RunConfig::validate() const {
  std::vector<std::string> problems;
  auto check = [&](auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      problems.push_back(e.what());
    }
  };
  check([&] { node.validate(); });
  check([&] { burst.spec.validate(); });
  if (node.memory_bytes == 0) problems.push_back("node.memory_gib must be > 0");
  if (node.hot_tub_capacity_per_core > 1'000'000)
    problems.push_back("node.hot_tub_capacity_per_core is unreasonably large");
  if (node.anticipatory.unwarmed_page_factor < 1)
    problems.push_back("node.anticipatory.unwarmed_page_factor must be >= 1");
  if (node.cost.control_plane_peak_rps != std::floor(node.cost.control_plane_peak_rps))
    problems.push_back("cost_model.control_plane_peak_rps must be a whole number");
  if (throughput.n < 1) problems.push_back("throughput.n must be >= 1");
  if (throughput.m_start < 1) problems.push_back("throughput.m_start must be >= 1");
  if (throughput.m_end < throughput.m_start)
    problems.push_back("throughput.m_end must be >= throughput.m_start");
  if (throughput.concurrency < 1) problems.push_back("throughput.concurrency must be >= 1");
  if (burst.control_plane_burst < 1) problems.push_back("burst.control_plane_burst must be >= 1");
  if (!(density.memory_gib >= 0)) problems.push_back("density.memory_gib must be >= 0");
  if (density.process_footprint_kib == 0 || density.container_footprint_kib == 0 ||
      density.microvm_footprint_kib == 0)
    problems.push_back("density footprints must be > 0");
  if (output.dir.empty()) problems.push_back("output.dir must not be empty");
  if (!(output.sample_interval_ms >= 0)) problems.push_back("output.sample_interval_ms must be >= 0");
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

RunConfig parse_config(const std::string& text) {
  json user;
  try {
    user = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("malformed JSON: ") + e.what()});
  }
  if (!user.is_object()) throw ConfigError({"top level must be a JSON object"});
  json merged = to_json(RunConfig{});
  std::vector<std::string> problems;
  overlay(merged, user, "", problems);
  if (!problems.empty()) throw ConfigError(std::move(problems));
  RunConfig cfg;
  try {
    cfg = from_json(merged);
  } catch (const std::exception& e) {
    throw ConfigError({e.what()});
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read config file '" + path + "'"});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

NodeConfig throughput_node(const RunConfig& cfg, Backend backend) {
  NodeConfig n = cfg.node;
  n.backend = backend;
  n.containers.prewarm_pool_size = cfg.throughput.prewarm_pool_size;
  n.control_plane_burst = 0;
  return n;
}

NodeConfig burst_node(const RunConfig& cfg, Backend backend) {
  NodeConfig n = cfg.node;
  n.backend = backend;
  n.containers.prewarm_pool_size = cfg.burst.prewarm_pool_size;
  n.control_plane_burst = cfg.burst.control_plane_burst;
  return n;
}

}  // namespace seuss
