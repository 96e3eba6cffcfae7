// cransim command-line front end: calibrate / run / report / layout.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "cransim/io.hpp"
#include "cransim/kern.hpp"

namespace fs = std::filesystem;
using namespace cransim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct SchemeArgs {
  std::string scheme = "dynamic";
  int strongest_s = 2;
  double eta1_db = 14.0;
  double eta2_db = 12.0;
  double bias_pico_db = 6.0;
  double bias_macro_db = 0.0;
  int kmax_macro = 70;
  int kmax_pico = 10;

  sim::SchemeSpec resolve() const {
    sim::SchemeSpec spec;
    clustering::ClusterPolicy& p = spec.policy;
    p.strongest_s = strongest_s;
    p.eta1_db = eta1_db;
    p.eta2_db = eta2_db;
    p.bias_macro_db = bias_macro_db;
    p.bias_pico_db = bias_pico_db;
    p.kmax_macro = kmax_macro;
    p.kmax_pico = kmax_pico;
    if (scheme == "dynamic") {
      spec.kind = sim::SchemeKind::dynamic;
    } else if (scheme == "static:max_loading") {
      spec.kind = sim::SchemeKind::static_max_loading;
    } else if (scheme == "static:biased") {
      spec.kind = sim::SchemeKind::static_biased;
    } else if (scheme == "baseline:strongest_s" || scheme == "strongest_s") {
      spec.kind = sim::SchemeKind::baseline_strongest;
    } else if (scheme == "baseline:disjoint" || scheme == "disjoint") {
      spec.kind = sim::SchemeKind::baseline_disjoint;
    } else {
      throw std::invalid_argument("unknown scheme: " + scheme);
    }
    return spec;
  }

  std::string params_json() const {
    std::ostringstream os;
    os << "{\"strongest_s\":" << strongest_s << ",\"eta1_db\":" << eta1_db
       << ",\"eta2_db\":" << eta2_db << ",\"bias_pico_db\":" << bias_pico_db
       << ",\"bias_macro_db\":" << bias_macro_db << ",\"kmax_macro\":" << kmax_macro
       << ",\"kmax_pico\":" << kmax_pico << "}";
    return os.str();
  }
};

bool parse_backhaul_pair(const std::string& s, double* macro, double* pico) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) return false;
  try {
    *macro = std::stod(s.substr(0, comma));
    *pico = std::stod(s.substr(comma + 1));
  } catch (const std::exception&) {
    return false;
  }
  return *macro >= 0.0 && *pico >= 0.0;
}

void run_one_campaign(const NetworkConfig& net_base, const sim::CampaignConfig& cc_base,
                      std::uint64_t seed, const fs::path& out,
                      const SchemeArgs& sa, bool trace, int dump_channel_slot,
                      const std::string& dump_qcqp, bool dump_layout) {
  const auto t0 = std::chrono::steady_clock::now();
  NetworkConfig net = net_base;
  net.rng_seed = seed;
  sim::CampaignConfig cc = cc_base;
  if (!dump_qcqp.empty()) cc.engine.dump_qcqp_path = (out / dump_qcqp).string();

  fs::create_directories(out);
  const sim::CampaignResult res = sim::run_campaign(cc, net);

  io::write_rates_csv(res, (out / "rates.csv").string());
  io::write_backhaul_csv(res, (out / "backhaul.csv").string());
  io::write_utility_csv(res, (out / "utility.csv").string());
  std::vector<std::string> outputs = {"rates.csv", "backhaul.csv", "utility.csv"};

  if (trace) {
    std::ofstream os(out / "trace_slot0.csv");
    res.first_slot_trace.write_csv(os);
    outputs.push_back("trace_slot0.csv");
  }

  NetworkLayout layout = build_layout(net);
  if (dump_layout) {
    io::write_layout_csv(layout, (out / "layout_bs.csv").string(),
                         (out / "layout_users.csv").string());
    outputs.push_back("layout_bs.csv");
    outputs.push_back("layout_users.csv");
  }
  if (cc.scheme.kind != sim::SchemeKind::dynamic) {
    const auto gains = sample_large_scale(layout, net.rng_seed);
    const auto strengths = strength_table(layout, gains);
    clustering::ClusterPolicy p = cc.scheme.policy;
    switch (cc.scheme.kind) {
      case sim::SchemeKind::static_max_loading: p.kind = clustering::PolicyKind::max_loading; break;
      case sim::SchemeKind::static_biased: p.kind = clustering::PolicyKind::biased; break;
      case sim::SchemeKind::baseline_strongest: p.kind = clustering::PolicyKind::strongest_s; break;
      case sim::SchemeKind::baseline_disjoint: p.kind = clustering::PolicyKind::disjoint_cell; break;
      default: break;
    }
    io::write_clusters_csv(clustering::build_clusters(strengths, layout, p),
                           (out / "clusters.csv").string());
    outputs.push_back("clusters.csv");
  }
  if (dump_channel_slot >= 0 && dump_channel_slot < cc.num_slots) {
    const auto gains = sample_large_scale(layout, net.rng_seed);
    const auto ch = sample_channel(layout, gains, net.rng_seed, dump_channel_slot);
    io::write_channel_csv(ch, (out / "channel.csv").string());
    outputs.push_back("channel.csv");
  }

  io::ManifestInfo mi;
  mi.command = "run";
  mi.scheme = sim::scheme_name(cc.scheme.kind);
  mi.seed = seed;
  mi.num_slots = cc.num_slots;
  mi.net = net;
  mi.backhaul_macro_mbps = cc.backhaul_override ? cc.backhaul_macro_mbps : net.macro_backhaul_mbps;
  mi.backhaul_pico_mbps = cc.backhaul_override ? cc.backhaul_pico_mbps : net.pico_backhaul_mbps;
  mi.outputs = outputs;
  mi.extra_json = sa.params_json();
  mi.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  io::write_manifest(mi, (out / "manifest.json").string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cransim: downlink C-RAN sparse-beamforming campaign runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  int slots = 1;
  SchemeArgs sa;

  // --- calibrate ---
  auto* cal = app.add_subcommand("calibrate",
                                 "run an unconstrained baseline and print its "
                                 "(C_macro, C_pico) backhaul consumption in Mbps");
  cal->add_option("--config", config_path, "network config file")->required();
  std::string cal_scheme = "strongest_s";
  cal->add_option("--scheme", cal_scheme, "strongest_s or disjoint");
  cal->add_option("--s", sa.strongest_s, "number of strongest BSs for the baseline");
  cal->add_option("--slots", slots, "number of scheduling slots")->required();
  cal->add_option("--seed", seed, "campaign seed");
  cal->add_option("--out", out_dir, "manifest directory");

  // --- run ---
  auto* run = app.add_subcommand("run", "run a campaign and write CSV results");
  run->add_option("--config", config_path, "network config file")->required();
  run->add_option("--scheme", sa.scheme,
                  "dynamic | static:max_loading | static:biased | "
                  "baseline:strongest_s | baseline:disjoint");
  std::string backhaul_arg;
  run->add_option("--backhaul", backhaul_arg, "C_macro,C_pico in Mbps");
  run->add_option("--slots", slots, "number of scheduling slots")->required();
  run->add_option("--seed", seed, "campaign seed");
  std::vector<std::uint64_t> seeds;
  run->add_option("--seeds", seeds, "multiple seeds (each under out/seed<N>/)");
  int parallel = 1;
  run->add_option("--parallel", parallel, "worker threads for --seeds");
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_option("--s", sa.strongest_s, "baseline strongest-S parameter");
  run->add_option("--eta1", sa.eta1_db, "candidate strength gap, dB");
  run->add_option("--eta2", sa.eta2_db, "biased-cluster strength gap, dB");
  run->add_option("--bias-pico", sa.bias_pico_db, "pico strength bias, dB");
  run->add_option("--bias-macro", sa.bias_macro_db, "macro strength bias, dB");
  run->add_option("--kmax-macro", sa.kmax_macro, "macro load cap");
  run->add_option("--kmax-pico", sa.kmax_pico, "pico load cap");
  int lc_override = -1;
  run->add_option("--lc", lc_override, "candidate-set size for dynamic clustering");
  int max_iters = 100;
  run->add_option("--max-iters", max_iters, "engine iterations per slot");
  bool no_prune = false, no_shrink = false, trace = false, dump_layout = false;
  run->add_flag("--no-prune", no_prune, "disable iterative link removal");
  run->add_flag("--no-shrink", no_shrink, "disable user-pool shrinking");
  run->add_flag("--trace", trace, "write the slot-0 engine trace CSV");
  run->add_flag("--dump-layout", dump_layout, "write BS/user position CSVs");
  int dump_channel_slot = -1;
  run->add_option("--dump-channel-slot", dump_channel_slot,
                  "write one slot's channel matrices as CSV");
  std::string dump_qcqp;
  run->add_option("--dump-qcqp", dump_qcqp,
                  "file name for the first solver subproblem dump");

  // --- report ---
  auto* rep = app.add_subcommand("report", "compare runs against a baseline run");
  std::vector<std::string> result_dirs;
  rep->add_option("dirs", result_dirs, "result directories")->required();
  std::string baseline_dir;
  rep->add_option("--baseline", baseline_dir, "baseline result directory")->required();
  rep->add_option("--out", out_dir, "report output directory");

  // --- layout ---
  auto* lay = app.add_subcommand("layout", "export BS and user positions");
  lay->add_option("--config", config_path, "network config file")->required();
  lay->add_option("--seed", seed, "layout seed");
  lay->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (cal->parsed()) {
      NetworkConfig net = io::load_network_config(config_path);
      if (cal->count("--seed")) net.rng_seed = seed;
      sim::SchemeSpec spec;
      if (cal_scheme == "strongest_s") {
        spec.kind = sim::SchemeKind::baseline_strongest;
      } else if (cal_scheme == "disjoint") {
        spec.kind = sim::SchemeKind::baseline_disjoint;
      } else {
        std::cerr << "calibrate: unknown baseline scheme " << cal_scheme << "\n";
        return kExitUsage;
      }
      spec.policy.strongest_s = sa.strongest_s;
      const auto t0 = std::chrono::steady_clock::now();
      const sim::Calibration c = sim::calibrate_backhaul(spec, net, slots);
      std::cout << c.macro_mbps << " " << c.pico_mbps << "\n";
      fs::create_directories(out_dir);
      io::ManifestInfo mi;
      mi.command = "calibrate";
      mi.scheme = sim::scheme_name(spec.kind);
      mi.seed = net.rng_seed;
      mi.num_slots = slots;
      mi.net = net;
      mi.backhaul_macro_mbps = c.macro_mbps;
      mi.backhaul_pico_mbps = c.pico_mbps;
      mi.extra_json = sa.params_json();
      mi.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      io::write_manifest(mi, (fs::path(out_dir) / "manifest.json").string());
      return kExitOk;
    }

    if (run->parsed()) {
      NetworkConfig net = io::load_network_config(config_path);
      if (lc_override > 0) net.candidate_limit = lc_override;
      net.validate();

      sim::CampaignConfig cc;
      cc.scheme = sa.resolve();
      cc.num_slots = slots;
      cc.engine.max_iters = max_iters;
      cc.engine.enable_prune = !no_prune;
      cc.engine.enable_shrink = !no_shrink;
      if (!backhaul_arg.empty()) {
        if (!parse_backhaul_pair(backhaul_arg, &cc.backhaul_macro_mbps,
                                 &cc.backhaul_pico_mbps)) {
          std::cerr << "run: --backhaul expects C_macro,C_pico in Mbps\n";
          return kExitUsage;
        }
        cc.backhaul_override = true;
      }

      if (seeds.empty()) {
        if (run->count("--seed")) {
          run_one_campaign(net, cc, seed, out_dir, sa, trace, dump_channel_slot,
                           dump_qcqp, dump_layout);
        } else {
          run_one_campaign(net, cc, net.rng_seed, out_dir, sa, trace,
                           dump_channel_slot, dump_qcqp, dump_layout);
        }
      } else {
        const int workers = std::max(1, parallel);
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        std::atomic<bool> failed{false};
        std::string error;
        std::mutex err_mu;
        for (int t = 0; t < workers; ++t) {
          pool.emplace_back([&] {
            for (;;) {
              const std::size_t i = next.fetch_add(1);
              if (i >= seeds.size()) return;
              try {
                const fs::path sub = fs::path(out_dir) / ("seed" + std::to_string(seeds[i]));
                run_one_campaign(net, cc, seeds[i], sub, sa, trace,
                                 dump_channel_slot, dump_qcqp, dump_layout);
              } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(err_mu);
                failed = true;
                error = e.what();
              }
            }
          });
        }
        for (auto& th : pool) th.join();
        if (failed) throw std::runtime_error(error);
      }
      return kExitOk;
    }

    if (rep->parsed()) {
      std::vector<std::string> names;
      std::vector<std::vector<double>> rates;
      auto load = [&](const std::string& dir) {
        auto [ids, r] = io::read_rates_csv((fs::path(dir) / "rates.csv").string());
        names.push_back(fs::path(dir).filename().string());
        rates.push_back(std::move(r));
      };
      load(baseline_dir);
      for (const auto& d : result_dirs) {
        if (fs::weakly_canonical(d) != fs::weakly_canonical(baseline_dir)) load(d);
      }
      const report::ComparisonReport crep = report::make_report(names, rates, 0);
      fs::create_directories(out_dir);
      io::write_report_csv(crep, (fs::path(out_dir) / "report.csv").string());
      io::write_report_json(crep, (fs::path(out_dir) / "report.json").string());
      for (std::size_t i = 0; i < names.size(); ++i) {
        io::write_cdf_csv(report::cdf_points(rates[i]),
                          (fs::path(out_dir) / ("cdf_" + names[i] + ".csv")).string());
      }
      for (const auto& e : crep.entries) {
        std::cout << e.name << ": p50 " << e.p50 << " Mbps (gain " << e.gain50
                  << "%)\n";
      }
      return kExitOk;
    }

    if (lay->parsed()) {
      NetworkConfig net = io::load_network_config(config_path);
      if (lay->count("--seed")) net.rng_seed = seed;
      const NetworkLayout layout = build_layout(net);
      fs::create_directories(out_dir);
      io::write_layout_csv(layout, (fs::path(out_dir) / "layout_bs.csv").string(),
                           (fs::path(out_dir) / "layout_users.csv").string());
      return kExitOk;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
