#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mixlab/bounds.hpp"
#include "mixlab/chain.hpp"
#include "mixlab/context.hpp"
#include "mixlab/gamma.hpp"
#include "mixlab/potential.hpp"
#include "mixlab/renewal.hpp"
#include "mixlab/schedule.hpp"
#include "mixlab/variations.hpp"

namespace mixlab::io {

using nlohmann::json;

/// 17 significant digits, C locale, '.' decimal point: values round-trip.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (v == kInf) return "inf";
    if (v == -kInf) return "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : s) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// ---------------------------------------------------------------------------
// variation sequences: {kind, params, table}

inline json to_json(const VariationSequence& v) {
    json j;
    j["table"] = json::array();
    for (std::size_t m = 0; m < v.table_size(); ++m) j["table"].push_back(v.value(m));
    switch (v.tail().kind) {
        case VariationSequence::TailKind::Zero:
            j["kind"] = "zero";
            j["params"] = json::object();
            break;
        case VariationSequence::TailKind::Geometric:
            j["kind"] = "geometric";
            j["params"] = {{"coefficient", v.tail().coeff}, {"ratio", v.tail().param}};
            break;
        case VariationSequence::TailKind::Polynomial:
            j["kind"] = "polynomial";
            j["params"] = {{"coefficient", v.tail().coeff}, {"exponent", v.tail().param}};
            break;
    }
    return j;
}

inline VariationSequence variations_from_json(const json& j) {
    std::vector<double> table;
    if (j.contains("table"))
        for (const auto& x : j.at("table")) table.push_back(x.get<double>());
    const std::string kind = j.value("kind", "zero");
    VariationSequence::Tail tail;
    const json params = j.value("params", json::object());
    if (kind == "zero") {
        tail.kind = VariationSequence::TailKind::Zero;
    } else if (kind == "geometric") {
        tail.kind = VariationSequence::TailKind::Geometric;
        tail.coeff = params.at("coefficient").get<double>();
        tail.param = params.at("ratio").get<double>();
    } else if (kind == "polynomial") {
        tail.kind = VariationSequence::TailKind::Polynomial;
        tail.coeff = params.at("coefficient").get<double>();
        tail.param = params.at("exponent").get<double>();
    } else {
        throw std::invalid_argument("variation sequence: unknown kind '" + kind + "'");
    }
    return VariationSequence(std::move(table), tail);
}

// ---------------------------------------------------------------------------
// gamma sequences: {kind, params, table}

inline GammaSequence gamma_from_json(const json& j) {
    const std::string kind = j.value("kind", "table");
    const json params = j.value("params", json::object());
    if (kind == "zero") return GammaSequence::zero();
    if (kind == "constant") return GammaSequence::constant(params.at("value").get<double>());
    if (kind == "geometric")
        return GammaSequence::geometric(params.at("coefficient").get<double>(),
                                        params.at("ratio").get<double>());
    if (kind == "polynomial")
        return GammaSequence::polynomial(params.at("coefficient").get<double>(),
                                         params.at("exponent").get<double>(),
                                         params.value("shift", 0.0));
    if (kind == "table") {
        std::vector<double> table;
        for (const auto& x : j.at("table")) table.push_back(x.get<double>());
        GammaSequence::Tail tail; // zero tail unless specified
        if (j.contains("tail")) {
            const json& t = j.at("tail");
            const std::string tk = t.value("kind", "zero");
            if (tk == "zero") {
                tail.kind = GammaSequence::TailKind::Zero;
            } else if (tk == "constant") {
                tail.kind = GammaSequence::TailKind::Constant;
                tail.coeff = t.at("value").get<double>();
            } else if (tk == "geometric") {
                tail.kind = GammaSequence::TailKind::Geometric;
                tail.coeff = t.at("coefficient").get<double>();
                tail.param = t.at("ratio").get<double>();
            } else if (tk == "polynomial") {
                tail.kind = GammaSequence::TailKind::Polynomial;
                tail.coeff = t.at("coefficient").get<double>();
                tail.param = t.at("exponent").get<double>();
                tail.shift = t.value("shift", 0.0);
            } else {
                throw std::invalid_argument("gamma sequence: unknown tail kind '" + tk + "'");
            }
        }
        return GammaSequence(std::move(table), tail);
    }
    throw std::invalid_argument("gamma sequence: unknown kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// contexts: symbol strings oldest-to-newest, optional extension rule

inline Context context_from_json(const json& j, const Alphabet& alphabet) {
    if (j.is_string())
        return Context::from_string(alphabet, j.get<std::string>());
    const std::string word = j.at("word").get<std::string>();
    Extension ext = Extension::Periodic;
    int pad = 0;
    if (j.contains("extension")) {
        const std::string e = j.at("extension").get<std::string>();
        if (e == "periodic") {
            ext = Extension::Periodic;
        } else if (e == "pad") {
            ext = Extension::Pad;
            const std::string p = j.value("pad", std::string(1, alphabet.symbol(0)));
            pad = alphabet.index_of(p.at(0));
        } else {
            throw std::invalid_argument("context: unknown extension '" + e + "'");
        }
    }
    return Context::from_string(alphabet, word, ext, pad);
}

// ---------------------------------------------------------------------------
// potentials: {alphabet, memory_order, table} or {alphabet, family, params}

inline Potential potential_from_json(const json& j) {
    const Alphabet alphabet(j.at("alphabet").get<std::string>());
    if (j.contains("family")) {
        const std::string family = j.at("family").get<std::string>();
        const json params = j.value("params", json::object());
        const double coeff = params.at("coefficient").get<double>();
        const double decay = params.at("decay").get<double>();
        if (family == "geometric")
            return Potential::weighted_match(alphabet, Potential::WeightFamily::Geometric, coeff,
                                             decay);
        if (family == "polynomial")
            return Potential::weighted_match(alphabet, Potential::WeightFamily::Polynomial, coeff,
                                             decay);
        throw std::invalid_argument("potential: unknown family '" + family + "'");
    }
    const std::size_t order = j.at("memory_order").get<std::size_t>();
    const std::size_t cells = checked_power(alphabet.size(), order + 1);
    std::vector<double> values(cells, 0.0);
    std::vector<bool> seen(cells, false);
    for (const auto& [key, val] : j.at("table").items()) {
        if (key.size() != order + 1)
            throw std::invalid_argument("potential: key '" + key + "' has wrong length");
        std::size_t idx = 0;
        for (char c : key) idx = idx * alphabet.size() + static_cast<std::size_t>(alphabet.index_of(c));
        values[idx] = val.is_null() ? -kInf : val.get<double>();
        seen[idx] = true;
    }
    for (bool s : seen)
        if (!s) throw std::invalid_argument("potential: table leaves entries undefined");
    return Potential::table(alphabet, order, std::move(values), j.value("normalized", false));
}

inline json potential_to_json(const Potential& p) {
    json j;
    j["alphabet"] = p.alphabet().symbols();
    const auto order = p.memory_order();
    if (!order) throw std::domain_error("potential_to_json: table potentials only");
    j["memory_order"] = *order;
    j["normalized"] = p.normalized();
    const auto& values = p.raw_table();
    const std::size_t asize = p.alphabet().size();
    json table = json::object();
    std::string key(*order + 1, '?');
    for (std::size_t idx = 0; idx < values.size(); ++idx) {
        std::size_t rest = idx;
        for (std::size_t pos = *order + 1; pos-- > 0;) {
            key[pos] = p.alphabet().symbol(static_cast<int>(rest % asize));
            rest /= asize;
        }
        table[key] = values[idx] == -kInf ? json() : json(values[idx]);
    }
    j["table"] = std::move(table);
    return j;
}

// ---------------------------------------------------------------------------
// cylinder functions

inline CylinderFunction cylinder_from_json(const json& j, const Alphabet& alphabet) {
    if (j.contains("indicator_last")) {
        const std::string s = j.at("indicator_last").get<std::string>();
        return CylinderFunction::indicator_last(alphabet, alphabet.index_of(s.at(0)));
    }
    if (j.contains("constant"))
        return CylinderFunction::constant(alphabet, j.at("constant").get<double>());
    const std::size_t depth = j.at("depth").get<std::size_t>();
    const std::size_t cells = checked_power(alphabet.size(), depth);
    std::vector<double> values(cells, 0.0);
    std::vector<bool> seen(cells, false);
    for (const auto& [key, val] : j.at("table").items()) {
        if (key.size() != depth)
            throw std::invalid_argument("cylinder function: key '" + key + "' has wrong length");
        std::size_t idx = 0;
        for (char c : key) idx = idx * alphabet.size() + static_cast<std::size_t>(alphabet.index_of(c));
        values[idx] = val.get<double>();
        seen[idx] = true;
    }
    for (bool s : seen)
        if (!s) throw std::invalid_argument("cylinder function: table leaves entries undefined");
    return CylinderFunction(alphabet, depth, std::move(values));
}

// ---------------------------------------------------------------------------
// block schedules

inline std::optional<BlockSchedule> schedule_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    if (j.is_string() && j.get<std::string>() == "auto") return std::nullopt;
    const std::string kind = j.value("kind", "linear");
    if (kind == "linear") return BlockSchedule::linear(j.value("step", std::size_t{1}));
    if (kind == "explicit") {
        std::vector<std::size_t> times;
        for (const auto& t : j.at("times")) times.push_back(t.get<std::size_t>());
        return BlockSchedule::explicit_times(std::move(times));
    }
    throw std::invalid_argument("schedule: unknown kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// reports

inline json classification_to_json(const DecayClassification& c) {
    json j;
    j["regime"] = c.regime;
    j["weak_relaxation"] = c.weak_relaxation;
    j["gamma_summable"] = c.gamma_summable;
    j["gamma_star_summable"] = c.gamma_star_summable;
    j["exp_rate"] = c.exp_rate;
    j["exp_r2"] = c.exp_r2;
    j["loglog_r2"] = c.loglog_r2;
    j["poly_ratio_first_half"] = c.poly_ratio_first;
    j["poly_ratio_second_half"] = c.poly_ratio_second;
    j["window"] = {c.window_lo, c.window_hi};
    j["gamma_star_at_horizon"] = c.gamma_star_tail;
    return j;
}

} // namespace mixlab::io
