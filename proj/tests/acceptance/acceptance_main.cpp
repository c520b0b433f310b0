// Acceptance runner: one PASS/FAIL line per criterion, exit status 0 only
// when every criterion passes. Optional arguments restrict the run to
// criteria whose name contains one of them.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "oracles.hpp"
#include "tdrive/harness.hpp"
#include "tdrive/io.hpp"

using namespace tdrive;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failed sub-checks so a criterion reports all of them at once.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void note(const std::string& s) { notes_.push_back(s); }
  Outcome outcome() const {
    Outcome o;
    o.pass = failures_.empty();
    std::string d;
    for (const auto& n : notes_) d += (d.empty() ? "" : "; ") + n;
    for (const auto& f : failures_) d += (d.empty() ? "" : "; ") + std::string("FAILED ") + f;
    o.detail = d;
    return o;
  }

 private:
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

Outcome gradient_oracle() {
  Checks c;
  const std::string cmd = std::string(TDRIVE_CLI_PATH) + " gradcheck --seeds 5 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  std::string out;
  char buf[4096];
  std::size_t n;
  while (pipe && (n = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  const int status = pipe ? pclose(pipe) : -1;
  c.expect(WIFEXITED(status) && WEXITSTATUS(status) == 0, "gradcheck exit status 0");
  c.expect(out.find("45-256-256-3") != std::string::npos, "default actor shape 45-256-256-3 covered");
  const auto pos = out.find("max relative error ");
  double worst = 1.0;
  if (pos != std::string::npos) worst = std::stod(out.substr(pos + 19));
  c.note("max rel err " + fmt("%.3e", worst));
  c.expect(worst < 1e-4, "max relative error < 1e-4");
  return c.outcome();
}

nn::Mlp widen(const td3::Net& net) {
  nn::Mlp out(net.layer_sizes(), net.output_activation());
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    out.layers()[l].weight = net.layers()[l].weight.cast<double>();
    out.layers()[l].bias = net.layers()[l].bias.cast<double>();
  }
  return out;
}

Outcome td3_mechanics() {
  Checks c;
  using namespace td3;
  Td3Config cfg;
  Td3Agent agent(45, cfg, 101);
  ReplayBuffer buffer(5000, 45);
  Rng data(102);
  for (int i = 0; i < 500; ++i) {
    Transition t;
    for (int k = 0; k < 45; ++k) {
      t.state.push_back(data.uniform(-1, 1));
      t.next_state.push_back(data.uniform(-1, 1));
    }
    t.action = agent.random_action();
    t.reward = data.uniform(-100, 100);
    t.done_kind = static_cast<DoneKind>(data.index(4));
    buffer.push(t);
  }

  // (a) delayed actor updates
  bool every_second = true;
  for (int call = 1; call <= 1000; ++call) {
    const td3::Net before = agent.actor();
    const TrainDiagnostics d = agent.train_step(buffer);
    const bool expect_update = call % 2 == 0;
    every_second &= d.did_actor_update == expect_update;
    every_second &= (agent.actor() == before) != expect_update;
  }
  c.expect(every_second, "(a) actor changes on exactly every 2nd call");
  c.expect(agent.actor_update_count() == 500, "(a) 500 actor updates in 1000 calls");
  c.expect(agent.all_finite(), "(a) parameters finite");

  // (b) clipped double-Q
  Rng sampler(103);
  int larger = 0;
  bool min_used = true, q1_differs = true;
  for (int b = 0; b < 100; ++b) {
    const Batch batch = buffer.sample(64, sampler);
    const TdTargets t = agent.critic_targets(batch);
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
      const double discount = batch.bootstrap(i) * cfg.gamma;
      min_used &= t.y(i) == batch.rewards(i) + discount * std::min(t.q1(i), t.q2(i));
      if (t.q1(i) > t.q2(i) && batch.bootstrap(i) > 0.0) {
        ++larger;
        q1_differs &= t.y(i) != batch.rewards(i) + discount * t.q1(i);
      }
    }
  }
  c.expect(min_used, "(b) target equals r + bootstrap*gamma*min(Q1',Q2')");
  c.expect(larger > 0 && q1_differs, "(b) substituting Q1' changes the target whenever Q1' > Q2'");

  // (c) target smoothing noise
  Rng noise(104);
  double max_abs = 0.0, sum = 0.0, sq = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const NoiseDraw d = draw_target_noise(noise, cfg.target_noise_sigma, cfg.target_noise_clip);
    max_abs = std::max(max_abs, std::abs(d.clipped));
    sum += d.raw;
    sq += d.raw * d.raw;
  }
  const double sd = std::sqrt(sq / draws - (sum / draws) * (sum / draws));
  c.note("noise max|clipped| " + fmt("%.4f", max_abs) + ", raw sd " + fmt("%.4f", sd));
  c.expect(max_abs <= 0.5, "(c) |noise| <= 0.5 over 1e5 draws");
  c.expect(std::abs(sd - 0.2) <= 0.01, "(c) unclipped sd 0.2 +- 0.01");

  // (d) Polyak geometric decay
  // The operator is width-generic; the 1e-10 bound is checked in double.
  const nn::Mlp online = widen(agent.critic1());
  nn::Mlp target = widen(agent.critic2());
  const int steps = 200;
  std::vector<nn::DenseLayer> diff0 = online.layers();
  for (std::size_t l = 0; l < diff0.size(); ++l) {
    diff0[l].weight = target.layers()[l].weight - online.layers()[l].weight;
    diff0[l].bias = target.layers()[l].bias - online.layers()[l].bias;
  }
  for (int i = 0; i < steps; ++i) nn::polyak_update(target, online, cfg.tau);
  const double factor = std::pow(1.0 - cfg.tau, steps);
  double worst = 0.0;
  for (std::size_t l = 0; l < diff0.size(); ++l) {
    const nn::Matrix dw = target.layers()[l].weight - online.layers()[l].weight - factor * diff0[l].weight;
    const nn::Vector db = target.layers()[l].bias - online.layers()[l].bias - factor * diff0[l].bias;
    worst = std::max({worst, dw.cwiseAbs().maxCoeff(), db.cwiseAbs().maxCoeff()});
  }
  c.note("polyak deviation " + fmt("%.2e", worst));
  c.expect(worst <= 1e-10, "(d) target - online = (1-tau)^n (target0 - online0) to 1e-10");

  // (e) replay FIFO and uniform sampling
  ReplayBuffer fifo(5000, 1);
  for (int i = 0; i < 5001; ++i) fifo.push({{double(i)}, {0, 0, 0}, double(i), {0.0}, DoneKind::Running});
  c.expect(fifo.size() == 5000, "(e) size stays 5000");
  c.expect(fifo.oldest(0).reward == 1.0 && fifo.oldest(4999).reward == 5000.0, "(e) item 0 evicted first");
  ReplayBuffer hundred(100, 1);
  for (int i = 0; i < 100; ++i) hundred.push({{0.0}, {0, 0, 0}, 0.0, {0.0}, DoneKind::Running});
  std::vector<long> counts(100, 0);
  Rng idx(105);
  for (int k = 0; k < 10000; ++k)
    for (auto i : hundred.sample_indices(100, idx)) ++counts[i];
  const double chi = oracle::chi_square_uniform(counts);
  const double band = 3.0 * std::sqrt(2.0 * 99.0);
  c.note("chi2 " + fmt("%.1f", chi) + " (df 99, 3 sigma band " + fmt("%.1f", 99.0 - band) + ".." +
         fmt("%.1f", 99.0 + band) + ")");
  c.expect(std::abs(chi - 99.0) <= band, "(e) chi-square within 3 sigma");
  return c.outcome();
}

Outcome simulator_oracle() {
  Checks c;
  Rng rng(2025);
  int checked = 0, disagreements = 0, drawn = 0;
  while (checked < 1000) {
    ++drawn;
    const OrientedBox a{{rng.uniform(-1, 1), rng.uniform(-1, 1)}, rng.uniform(-3.2, 3.2), rng.uniform(0.3, 2.5),
                        rng.uniform(0.2, 1.2)};
    const OrientedBox b{{rng.uniform(-4, 4), rng.uniform(-4, 4)}, rng.uniform(-3.2, 3.2), rng.uniform(0.3, 2.5),
                        rng.uniform(0.2, 1.2)};
    const bool sampled = oracle::sampled_overlap(a, b);
    const double gap = sampled ? oracle::penetration(a, b) : oracle::separation(a, b);
    if (gap <= 0.01) continue;
    ++checked;
    disagreements += detect_collision(a, b) != sampled;
  }
  c.note("SAT vs sampling: " + std::to_string(disagreements) + " disagreements in " + std::to_string(checked) +
         " pairs (" + std::to_string(drawn - checked) + " marginal skipped)");
  c.expect(disagreements == 0, "collision detector matches sampling oracle on all non-marginal pairs");

  int crashes = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ScenarioConfig cfg;
    cfg.veh = 8;
    cfg.ped = 0;
    WorldState w = spawn_scenario(cfg, seed);
    w.ego_active = false;
    for (int t = 0; t < 500; ++t) {
      advance_world(w, Action{});
      crashes += count_traffic_collisions(w);
    }
  }
  c.note("autopilot collisions " + std::to_string(crashes));
  c.expect(crashes == 0, "autopilot-only world has zero collisions (8 vehicles, seeds 0-9, 500 ticks)");

  RunConfig run;
  run.td3.episodes = 3;
  run.td3.max_steps = 200;
  run.td3.exploration_steps = 250;
  run.scenario.veh = 4;
  run.scenario.ped = 2;
  const fs::path root = fs::temp_directory_path() / "tdrive_acceptance_determinism";
  fs::remove_all(root);
  for (const char* sub : {"a", "b"}) {
    TrainOptions opt;
    opt.out_dir = root / sub;
    train(run, 21, opt);
  }
  const std::string ca = read_file(root / "a" / "curve.csv"), cb = read_file(root / "b" / "curve.csv");
  c.expect(ca == cb && ca.size() > 50, "two runs of the same (config, seed) give byte-identical curve CSVs");
  c.expect(read_file(root / "a" / "checkpoint.json") == read_file(root / "b" / "checkpoint.json"),
           "and byte-identical checkpoints");
  return c.outcome();
}

Outcome reward_conformance() {
  Checks c;
  struct Row {
    const char* name;
    RewardInputs in;
    bool speed_term;
    RewardBreakdown expect;
  };
  auto in = [](bool col, bool goal, double pre, double cu, double v, double off, double other) {
    RewardInputs r;
    r.collided = col;
    r.reached_goal = goal;
    r.d_pre = pre;
    r.d_cu = cu;
    r.v_speed = v;
    r.v_limit = 8.33;
    r.m_offroad = off;
    r.m_otherlane = other;
    r.c_collision = 100.0;
    return r;
  };
  // Expected values evaluated by hand from the component definitions.
  const std::vector<Row> rows = {
      {"progress", in(false, false, 50.0, 48.5, 0.0, 0.0, 0.0), false, {0, 1.5, 0, 0, 0, 1.5}},
      {"regress", in(false, false, 10.0, 12.0, 0.0, 0.0, 0.0), false, {0, -2.0, 0, 0, 0, -2.0}},
      {"collision", in(true, false, 20.0, 20.0, 0.0, 0.0, 0.0), false, {-100, 0, 0, 0, 0, -100}},
      {"goal", in(false, true, 1.0, 0.0, 0.0, 0.0, 0.0), false, {0, 1.0, 0, 0, 100, 101}},
      {"lane", in(false, false, 5.0, 5.0, 0.0, 0.5, 0.25), false, {0, 0, 0, -0.75, 0, -0.75}},
      {"speed below limit, term off", in(false, false, 5.0, 5.0, 4.0, 0.0, 0.0), false, {0, 0, 4.0, 0, 0, 0}},
      {"speed below limit, term on", in(false, false, 5.0, 5.0, 4.0, 0.0, 0.0), true, {0, 0, 4.0, 0, 0, 0.2}},
      {"speed clamp", in(false, false, 5.0, 5.0, 12.0, 0.0, 0.0), true, {0, 0, 8.33, 0, 0, 0.05 * 8.33}},
      {"all terms", in(true, false, 30.0, 29.0, 6.0, 0.25, 0.5), true,
       {-100, 1.0, 6.0, -0.75, 0, -100 + 1.0 - 0.75 + 0.3}},
  };
  int mismatches = 0;
  for (const auto& row : rows) {
    RewardConfig cfg;
    cfg.include_speed_term = row.speed_term;
    const RewardBreakdown r = compute_reward(row.in, cfg);
    const bool ok = r.r1 == row.expect.r1 && r.r2 == row.expect.r2 && r.r3 == row.expect.r3 &&
                    r.r4 == row.expect.r4 && r.r5 == row.expect.r5 &&
                    std::abs(r.total - row.expect.total) <= 1e-12;
    if (!ok) ++mismatches;
    c.expect(ok, row.name);
  }
  c.note(std::to_string(rows.size() - static_cast<std::size_t>(mismatches)) + "/" + std::to_string(rows.size()) +
         " table rows match");
  return c.outcome();
}

Outcome learning_smoke() {
  Checks c;
  const std::uint64_t seeds[] = {0, 1, 2};
  constexpr std::uint64_t kEvalSeed = 777;
  RunConfig run;
  run.observation_mode = ObservationMode::Vector;
  run.scenario.veh = 4;
  run.scenario.ped = 2;
  run.scenario.map.route = Route::Left;
  run.td3.episodes = 300;
  run.td3.max_steps = 500;
  const Scenario desk = find_scenario("desk");
  const EnvConfig env = run.env_config();

  const EvalReport base = random_baseline(env, desk, 10, 10, kEvalSeed);
  c.note("baseline collisions " + fmt("%.3f", base.mean_collisions) + ", goal rate " +
         fmt("%.3f", base.mean_goal_rate));
  int passing = 0;
  for (std::uint64_t seed : seeds) {
    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult tr = train(run, seed, {});
    double first50 = 0.0;
    for (int i = 0; i < 50; ++i) first50 += tr.curve[static_cast<std::size_t>(i)].ret;
    first50 /= 50.0;
    const double last_ma = tr.curve.back().ma50_return;
    const EvalReport ev = evaluate(env, desk, actor_policy(tr.checkpoint.agent.actor()), 10, 10, kEvalSeed);
    const bool improved = last_ma > first50;
    const bool safer = ev.mean_collisions <= 0.5 * base.mean_collisions;
    const bool arrives = ev.mean_goal_rate >= 2.0 * base.mean_goal_rate;
    const bool ok = improved && safer && arrives;
    passing += ok;
    c.note("seed " + std::to_string(seed) + (ok ? " pass" : " fail") + ": first50 " + fmt("%.1f", first50) +
           " -> ma50 " + fmt("%.1f", last_ma) + ", collisions " + fmt("%.2f", ev.mean_collisions) +
           ", goal rate " + fmt("%.2f", ev.mean_goal_rate) + ", " + fmt("%.0f", seconds_since(t0)) + " s");
    std::fflush(stdout);
  }
  c.expect(passing >= 2, "at least 2 of 3 seeds pass");
  return c.outcome();
}

Outcome protocol_conformance() {
  Checks c;
  const auto table = density_table(1.0 / 25.0);
  const int expected[] = {4, 8, 12, 16, 18};
  bool densities = table.size() == 5;
  for (std::size_t i = 0; densities && i < 5; ++i)
    densities = table[i].ped == expected[i] && table[i].veh == expected[i];
  c.expect(densities, "k=1/25 densities (4,4),(8,8),(12,12),(16,16),(18,18)");

  const auto reports = sweep(EnvConfig{}, table, random_policy(), 10, 10, 5);
  c.expect(reports.size() == 5, "5 reports");
  const std::string csv = eval_csv(reports);

  // Recompute every summary row from the per-repeat rows in the CSV text.
  std::map<std::string, std::vector<double>> delays, collisions;
  std::map<std::string, std::vector<std::string>> summary;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto f = split(line, ',');
    if (f[1] == "all") {
      summary[f[0]] = f;
    } else {
      delays[f[0]].push_back(parse_double(f[2]));
      collisions[f[0]].push_back(parse_double(f[3]));
    }
  }
  bool ci_exact = summary.size() == 5;
  for (const auto& [name, f] : summary) {
    ci_exact &= delays[name].size() == 10;
    ci_exact &= parse_double(f[4]) == oracle::ci95_half_width(delays[name]);
    ci_exact &= parse_double(f[5]) == oracle::ci95_half_width(collisions[name]);
  }
  c.expect(ci_exact, "CI half-widths recompute exactly from per-repeat means in the CSV");

  bool capped = true;
  int failed = 0;
  for (const auto& r : reports)
    for (const auto& e : r.results) {
      if (e.outcome == DoneKind::Goal) continue;
      ++failed;
      capped &= e.travel_delay == 50.0;
    }
  c.note(std::to_string(failed) + " failed episodes checked");
  c.expect(failed > 0 && capped, "failed-episode travel delay is the 50 s cap");
  return c.outcome();
}

struct Criterion {
  const char* name;
  double time_limit_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Per-step network temporaries stay on the heap instead of fresh mmaps.
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
  const std::vector<Criterion> criteria = {
      {"gradient-oracle", 30.0, gradient_oracle},
      {"td3-mechanics", 60.0, td3_mechanics},
      {"simulator-oracle", 60.0, simulator_oracle},
      {"reward-conformance", 1.0, reward_conformance},
      {"learning-smoke", 20.0 * 60.0, learning_smoke},
      {"protocol-conformance", 5.0 * 60.0, protocol_conformance},
  };
  std::vector<std::string> filters(argv + 1, argv + argc);
  int failed = 0, ran = 0;
  for (const auto& crit : criteria) {
    if (!filters.empty()) {
      bool hit = false;
      for (const auto& f : filters) hit |= std::string(crit.name).find(f) != std::string::npos;
      if (!hit) continue;
    }
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = crit.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    const bool in_time = secs <= crit.time_limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s %-21s %7.1f s (limit %.0f s%s)  %s\n", pass ? "PASS" : "FAIL", crit.name, secs,
                crit.time_limit_s, in_time ? "" : ", EXCEEDED", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
