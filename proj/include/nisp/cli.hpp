#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nisp/error.hpp"

namespace nisp::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kDataError = 3, kInternal = 4 };

// Bad flag values or combinations.
class UsageError : public Error {
public:
    using Error::Error;
};

struct Ratios {
    std::optional<double> all;             // --ratio-all: keep fraction for every prunable layer
    std::map<std::size_t, double> layer;   // --ratio id=frac, overrides `all`
};

/// Parses "id=frac". Throws UsageError.
std::pair<std::size_t, double> parse_layer_ratio(const std::string& text);

struct RankOptions {
    std::string model, data, out;
    double alpha = 0.5;
    std::optional<double> pca_threshold;
};

struct PruneOptions {
    std::string model, data, out;  // out is a directory
    std::string strategy = "nisp";
    Ratios ratios;
    double alpha = 0.5;
    std::uint64_t seed = 0;
};

struct CompareOptions {
    std::string model, data, eval, out;
    std::vector<std::string> strategies{"nisp", "nisp-mag", "lbl", "random", "scratch"};
    Ratios ratios;
    double alpha = 0.5;
    std::uint64_t seed = 0;
    std::size_t seeds = 1;
    std::size_t epochs = 5;
    double lr = 0.1;
    std::size_t batch_size = 16;
};

struct VerifyOptions {
    std::string model, data, out;
    std::size_t layer = 0;
    double ratio = 0.5;  // keep fraction of the random masks
    std::size_t trials = 100;
    double alpha = 0.5;
    std::uint64_t seed = 0;
};

struct SynthOptions {
    std::string out;
    std::size_t classes = 4, dim = 8, per_class = 200;
    double spread = 0.5;
    std::uint64_t seed = 0;
};

struct TrainOptions {
    std::string data, out;
    std::vector<std::size_t> hidden{64, 32};
    std::string activation = "relu";
    std::size_t epochs = 20;
    double lr = 0.1;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
};

// Each command either writes all of its outputs or none; `log` receives progress text.
void cmd_rank(const RankOptions& opt, std::ostream& log);
void cmd_prune(const PruneOptions& opt, std::ostream& log);
void cmd_compare(const CompareOptions& opt, std::ostream& log);
void cmd_verify(const VerifyOptions& opt, std::ostream& log);
void cmd_synth(const SynthOptions& opt, std::ostream& log);
void cmd_train(const TrainOptions& opt, std::ostream& log);

/// Parses argv, runs the subcommand, and maps failures to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nisp::cli
