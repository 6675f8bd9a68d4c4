#pragma once

#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "moecov/metrics.hpp"

namespace moecov {

/// One archived kernel per line, as JSON. Infinities and NaN have no JSON
/// representation, so non-finite numbers are written as null and read back
/// as +inf (the faulted-fitness convention).

namespace detail {

inline nlohmann::json finite_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

inline double number_or_inf(const nlohmann::json& j) {
    if (j.is_null()) return kInfinity;
    return j.get<double>();
}

}  // namespace detail

inline nlohmann::json to_json(const EvaluatedIndividual& ind) {
    nlohmann::json j;
    j["expr"] = serialize(ind.expr);
    j["theta"] = nlohmann::json::array();
    for (double v : ind.theta) j["theta"].push_back(v);
    j["neg_pcc"] = detail::finite_or_null(ind.fitness.neg_pcc);
    j["nlpd"] = detail::finite_or_null(ind.fitness.nlpd);
    j["eval_seconds"] = detail::finite_or_null(ind.fitness.eval_seconds);
    j["mean_lml"] = detail::finite_or_null(ind.mean_lml);
    j["bic"] = detail::finite_or_null(ind.bic_value);
    j["generation"] = ind.generation;
    return j;
}

inline EvaluatedIndividual individual_from_json(const nlohmann::json& j) {
    EvaluatedIndividual ind;
    ind.expr = parse_expr(j.at("expr").get<std::string>());
    const auto& th = j.at("theta");
    ind.theta.resize(th.size());
    for (std::size_t i = 0; i < th.size(); ++i) ind.theta[i] = th[i].get<double>();
    ind.fitness.neg_pcc = detail::number_or_inf(j.at("neg_pcc"));
    ind.fitness.nlpd = detail::number_or_inf(j.at("nlpd"));
    ind.fitness.eval_seconds = detail::number_or_inf(j.at("eval_seconds"));
    if (j.contains("mean_lml") && !j.at("mean_lml").is_null())
        ind.mean_lml = j.at("mean_lml").get<double>();
    else
        ind.mean_lml = -kInfinity;
    ind.bic_value = j.contains("bic") ? detail::number_or_inf(j.at("bic")) : kInfinity;
    ind.generation = j.value("generation", 0);
    return ind;
}

inline void write_archive(std::ostream& out, const std::vector<EvaluatedIndividual>& archive) {
    for (const auto& ind : archive) out << to_json(ind).dump() << '\n';
}

inline std::vector<EvaluatedIndividual> read_archive(std::istream& in) {
    std::vector<EvaluatedIndividual> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            out.push_back(individual_from_json(j));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("archive: ") + e.what(), line_no);
        } catch (const ParseError& e) {
            throw FormatError(std::string("archive: bad expression: ") + e.what(), line_no);
        }
    }
    return out;
}

}  // namespace moecov
