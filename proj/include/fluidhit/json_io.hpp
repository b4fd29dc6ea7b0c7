#pragma once

#include "fluidhit/bounds.hpp"
#include "fluidhit/chain_model.hpp"
#include "fluidhit/simulator.hpp"

#include <json.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fluidhit {

class ChainIoError : public std::runtime_error {
  public:
    enum class Kind { FileNotFound, Parse, Schema };

    ChainIoError(Kind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

  private:
    Kind kind_;
};

struct ChainFile {
    AbsorbingChain chain;
    /// Present when the file gives "alpha".
    std::optional<InitialDistribution> alpha;
};

/// {"states": S+1, "P": [[...]...]} or {"states": S+1, "P_sparse": [{"row", "cols",
/// "probs"}...]}, optional "alpha" over states 1..S and "alpha0". Structural
/// problems raise ChainIoError; invalid chains raise ChainError.
ChainFile parse_chain_json(const nlohmann::json &doc);
ChainFile parse_chain_text(std::string_view text);
ChainFile load_chain_file(const std::string &path);

/// Sparse form when the chain was given sparsely, dense otherwise.
nlohmann::json chain_to_json(const AbsorbingChain &chain, const std::optional<InitialDistribution> &alpha = std::nullopt);

nlohmann::json report_to_json(const BoundReport &report);
nlohmann::json simulation_to_json(const SimulationResult &result, bool with_samples = false);

} // namespace fluidhit
