#include "fluidhit/json_io.hpp"

#include <fstream>
#include <sstream>

namespace fluidhit {

using nlohmann::json;

namespace {

[[noreturn]] void schema(const std::string &what) { throw ChainIoError(ChainIoError::Kind::Schema, what); }

std::vector<double> number_array(const json &node, const std::string &what) {
    if (!node.is_array()) {
        schema(what + " must be an array of numbers");
    }
    std::vector<double> out;
    out.reserve(node.size());
    for (const auto &x : node) {
        if (!x.is_number()) {
            schema(what + " must contain only numbers");
        }
        out.push_back(x.get<double>());
    }
    return out;
}

std::vector<std::size_t> index_array(const json &node, const std::string &what) {
    if (!node.is_array()) {
        schema(what + " must be an array of indices");
    }
    std::vector<std::size_t> out;
    out.reserve(node.size());
    for (const auto &x : node) {
        if (!x.is_number_integer() || x.get<long long>() < 0) {
            schema(what + " must contain nonnegative integers");
        }
        out.push_back(x.get<std::size_t>());
    }
    return out;
}

} // namespace

ChainFile parse_chain_json(const json &doc) {
    if (!doc.is_object()) {
        schema("chain file must be a JSON object");
    }
    if (!doc.contains("states") || !doc["states"].is_number_integer() || doc["states"].get<long long>() < 2) {
        schema("\"states\" must be an integer >= 2");
    }
    const auto states = doc["states"].get<std::size_t>();
    const bool dense = doc.contains("P");
    const bool sparse = doc.contains("P_sparse");
    if (dense == sparse) {
        schema("give exactly one of \"P\" and \"P_sparse\"");
    }
    ChainFile file;
    if (dense) {
        const auto &rows = doc["P"];
        if (!rows.is_array() || rows.size() != states) {
            schema("\"P\" must have " + std::to_string(states) + " rows");
        }
        num::DenseMatrix p(states, states);
        for (std::size_t i = 0; i < states; ++i) {
            const auto row = number_array(rows[i], "row " + std::to_string(i) + " of \"P\"");
            if (row.size() != states) {
                schema("row " + std::to_string(i) + " of \"P\" must have " + std::to_string(states) + " entries");
            }
            for (std::size_t j = 0; j < states; ++j) {
                p(i, j) = row[j];
            }
        }
        file.chain = validate_chain(p);
    } else {
        const auto &rows = doc["P_sparse"];
        if (!rows.is_array()) {
            schema("\"P_sparse\" must be an array of row objects");
        }
        std::vector<SparseRow> parsed;
        parsed.reserve(rows.size());
        for (const auto &r : rows) {
            if (!r.is_object() || !r.contains("row") || !r.contains("cols") || !r.contains("probs") ||
                !r["row"].is_number_integer() || r["row"].get<long long>() < 0) {
                schema("each \"P_sparse\" entry needs \"row\", \"cols\" and \"probs\"");
            }
            SparseRow row;
            row.row = r["row"].get<std::size_t>();
            row.cols = index_array(r["cols"], "\"cols\" of row " + std::to_string(row.row));
            row.probs = number_array(r["probs"], "\"probs\" of row " + std::to_string(row.row));
            parsed.push_back(std::move(row));
        }
        file.chain = validate_chain(states, parsed);
    }
    if (doc.contains("alpha")) {
        auto alpha = number_array(doc["alpha"], "\"alpha\"");
        if (alpha.size() != states - 1) {
            schema("\"alpha\" must have " + std::to_string(states - 1) + " entries (states 1.." +
                   std::to_string(states - 1) + ")");
        }
        double mass0 = 0.0;
        if (doc.contains("alpha0")) {
            if (!doc["alpha0"].is_number()) {
                schema("\"alpha0\" must be a number");
            }
            mass0 = doc["alpha0"].get<double>();
        }
        file.alpha = InitialDistribution::from_alpha(std::move(alpha), mass0);
    } else if (doc.contains("alpha0")) {
        schema("\"alpha0\" given without \"alpha\"");
    }
    return file;
}

ChainFile parse_chain_text(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error &e) {
        throw ChainIoError(ChainIoError::Kind::Parse, std::string("malformed JSON: ") + e.what());
    }
    return parse_chain_json(doc);
}

ChainFile load_chain_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ChainIoError(ChainIoError::Kind::FileNotFound, "cannot open chain file '" + path + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_chain_text(buffer.str());
}

json chain_to_json(const AbsorbingChain &chain, const std::optional<InitialDistribution> &alpha) {
    json doc;
    const auto &p = chain.transitions();
    doc["states"] = chain.size();
    if (chain.representation() == Representation::Dense) {
        json rows = json::array();
        for (std::size_t i = 0; i < p.rows(); ++i) {
            json row = json::array();
            for (std::size_t j = 0; j < p.cols(); ++j) {
                row.push_back(p.coeff(i, j));
            }
            rows.push_back(std::move(row));
        }
        doc["P"] = std::move(rows);
    } else {
        json rows = json::array();
        for (std::size_t i = 0; i < p.rows(); ++i) {
            const auto cols = p.row_cols(i);
            const auto vals = p.row_values(i);
            rows.push_back({{"row", i},
                            {"cols", std::vector<std::size_t>(cols.begin(), cols.end())},
                            {"probs", std::vector<double>(vals.begin(), vals.end())}});
        }
        doc["P_sparse"] = std::move(rows);
    }
    if (alpha) {
        doc["alpha"] = alpha->alpha;
        doc["alpha0"] = alpha->mass0;
    }
    return doc;
}

json report_to_json(const BoundReport &report) {
    json doc;
    for (const auto &e : report.entries) {
        doc[e.name] = {{"value", e.value},
                       {"role", std::string(role_name(e.role))},
                       {"provenance", e.provenance},
                       {"formula", e.formula}};
    }
    doc["instance"] = {{"chain", report.chain_id},
                       {"N", report.n},
                       {"transient_states", report.transient_states},
                       {"alpha0", report.alpha_mass0}};
    json quantities = json::object();
    for (const auto &[k, v] : report.quantities) {
        quantities[k] = v;
    }
    doc["quantities"] = std::move(quantities);
    json notes = json::object();
    for (const auto &[k, v] : report.notes) {
        notes[k] = v;
    }
    doc["notes"] = std::move(notes);
    doc["consistent"] = report.consistent;
    return doc;
}

json simulation_to_json(const SimulationResult &result, bool with_samples) {
    json doc;
    doc["mean"] = result.mean;
    doc["stderr"] = result.stderr_mean ? json(*result.stderr_mean) : json(nullptr);
    doc["ci95"] = result.ci95 ? json::array({result.ci95->first, result.ci95->second}) : json(nullptr);
    doc["runs"] = result.runs;
    doc["seed"] = result.seed;
    doc["failures"] = result.failures;
    doc["geometric_skip"] = result.geometric_skip;
    if (with_samples) {
        doc["samples"] = result.samples;
    }
    return doc;
}

} // namespace fluidhit
