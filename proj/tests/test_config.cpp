#include <doctest.h>

#include <random>
#include <string>
#include <vector>

#include "scm/config.hpp"

using namespace scm;

namespace {

const char* kFull = R"(# grid used by the attack figures
[run]
seed = 7
repeats = 2
threads = 4

[topology]
agents = 32
edge_probability = 0.7
malicious = 3, 6, 9, 12
seed = auto

[model]
dim = 10
noise_var = 0.01
w_seed = 99

[learning]
step_size = 0.05
iterations = 300
huber_delta = 1
batch_size = 1

[aggregators]
list = mean, trimmed, talwar, tukey, median
alpha = 0.0688
talwar_c = 2.7955
tukey_c = 4.685

[attack]
kinds = lv, alpha_scm, talwar_scm, tukey_scm
lv_magnitude = 1000
epsilon = auto

[output]
dir = results/fig4
metrics = loss, msd
)";

int error_line(std::string_view text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST_CASE("empty file gives defaults") {
  const auto cfg = parse_config("");
  CHECK(cfg == ExperimentConfig{});
  CHECK(cfg.agents == 32);
  CHECK(cfg.edge_probability == 0.7);
  CHECK(cfg.dim == 10);
  CHECK(cfg.noise_var == 0.01);
  CHECK(cfg.iterations == 300);
  CHECK(parse_config("# only a comment\n\n   \n") == ExperimentConfig{});
}

TEST_CASE("full file") {
  const auto cfg = parse_config(kFull);
  CHECK(cfg.seed == 7);
  CHECK(cfg.repeats == 2);
  CHECK(cfg.malicious == std::vector<int>{3, 6, 9, 12});
  CHECK_FALSE(cfg.topology_seed.has_value());
  CHECK(cfg.w_seed == 99u);
  CHECK(cfg.attacks.size() == 4);
  CHECK(cfg.attacks[2] == AttackKind::kTalwarScm);
  CHECK(cfg.dir == "results/fig4");

  const auto agg = make_aggregator(cfg, AggregatorKind::kTalwar);
  CHECK(agg.c == 2.7955);
  CHECK(make_attack(cfg, AttackKind::kAlphaScm).target_alpha == 0.0688);
}

TEST_CASE("round trip") {
  for (const char* text : {"", kFull}) {
    const auto cfg = parse_config(text);
    CHECK(parse_config(to_text(cfg)) == cfg);
    CHECK(to_text(parse_config(to_text(cfg))) == to_text(cfg));
  }
  ExperimentConfig odd;
  odd.step_size = 0.1 + 0.2;
  odd.epsilon = 3.3e-7;
  odd.base_seed = 18446744073709551615ull;
  odd.markers = false;
  CHECK(parse_config(to_text(odd)) == odd);
}

TEST_CASE("rejections carry line and key") {
  CHECK(error_line("[topology]\nagents = 32\nmalicious = 20\n") >= 0);
  try {
    parse_config("[topology]\nmalicious = 20\n");
    FAIL("expected rejection");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "topology.malicious");
  }
  CHECK(error_line("[run]\nseed = 1\nbogus = 2\n") == 3);
  CHECK(error_line("[nowhere]\n") == 1);
  CHECK(error_line("seed = 1\n") == 1);
  CHECK(error_line("[run]\nseed = 1\nseed = 2\n") == 3);
  CHECK(error_line("[run]\n\n\nthreads = zero\n") == 4);
  CHECK(error_line("[learning]\nstep_size = nan\n") == 2);
  CHECK(error_line("[run\n") == 1);
  CHECK(error_line("[run]\nno equals sign\n") == 2);
  CHECK(error_line("[aggregators]\nlist = mean, krum\n") == 2);
  CHECK(error_line("[aggregators]\nlist = mean, mean\n") >= 0);
  CHECK(error_line("[attack]\nkinds = lv\n") >= 0);  // attack with zero malicious agents
  CHECK(error_line("[efficiency]\ntrials = 10\n") >= 0);
  CHECK(error_line("[aggregators]\nalpha = 0.5\n") >= 0);
  CHECK(error_line("[topology]\nedge_probability = 1.5\n") >= 0);
}

TEST_CASE("parser fuzz raises only structured errors") {
  const std::string base = kFull;
  const std::vector<std::string> junk{"=", "[", "]", "#", ",", "\n", "-1", "1e999", "auto", " ", "x", "0", "\t",
                                      "mean", "none", "0.5", "99999999999999999999", "true", "[sweep]\n"};
  std::mt19937_64 rng(2718);
  int accepted = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    std::string text = base;
    const int edits = 1 + static_cast<int>(rng() % 4);
    for (int e = 0; e < edits; ++e) {
      const std::size_t pos = rng() % (text.size() + 1);
      switch (rng() % 3) {
        case 0: text.insert(pos, junk[rng() % junk.size()]); break;
        case 1: text.erase(pos, 1 + rng() % 6); break;
        default:
          if (pos < text.size()) text[pos] = static_cast<char>(32 + rng() % 95);
      }
    }
    try {
      const auto cfg = parse_config(text);
      ++accepted;
      CHECK(parse_config(to_text(cfg)) == cfg);
    } catch (const ConfigError&) {
    } catch (const std::exception& ex) {
      FAIL("unstructured error: " << ex.what());
    }
  }
  CHECK(accepted > 0);
}
