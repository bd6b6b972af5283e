#pragma once

#include <istream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nilmbound/errors.hpp"
#include "nilmbound/signature.hpp"

namespace nilmbound {

namespace detail {

inline nlohmann::json parse_json_document(const std::string& text, const std::string& what) {
    try {
        // Comments are allowed; the files are meant to be hand-edited.
        return nlohmann::json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(what + ": " + e.what());
    }
}

inline void reject_unknown_fields(const nlohmann::json& object,
                                  const std::set<std::string>& known,
                                  const std::string& context) {
    for (const auto& [key, value] : object.items())
        if (!known.count(key))
            throw ParseError(context + ": unknown field '" + key + "'");
}

inline double require_number(const nlohmann::json& object, const std::string& field,
                             const std::string& context) {
    if (!object.contains(field))
        throw ParseError(context + ": missing field '" + field + "'");
    if (!object[field].is_number())
        throw ParseError(context + ": field '" + field + "' must be a number");
    return object[field].get<double>();
}

inline double optional_number(const nlohmann::json& object, const std::string& field,
                              double fallback, const std::string& context) {
    if (!object.contains(field)) return fallback;
    if (!object[field].is_number())
        throw ParseError(context + ": field '" + field + "' must be a number");
    return object[field].get<double>();
}

}  // namespace detail

/// Parses one signature record. Shared by the catalog parser and the
/// scenario loader (which allows inline catalogs).
inline SignatureCatalog::Entry parse_signature_record(const nlohmann::json& record,
                                                      std::size_t position) {
    const std::string where = "signature #" + std::to_string(position + 1);
    if (!record.is_object()) throw ParseError(where + ": expected an object");
    if (!record.contains("label") || !record["label"].is_string())
        throw ParseError(where + ": needs a string 'label'");
    const std::string label = record["label"].get<std::string>();
    const std::string context = "signature '" + label + "'";
    if (!record.contains("kind") || !record["kind"].is_string())
        throw ParseError(context + ": needs a string 'kind'");
    const std::string kind = record["kind"].get<std::string>();

    if (kind == "raised_cosine_pulse") {
        detail::reject_unknown_fields(record, {"label", "kind", "amplitude", "duration"},
                                      context);
        RaisedCosinePulse s;
        s.amplitude = detail::require_number(record, "amplitude", context);
        s.duration = detail::require_number(record, "duration", context);
        return {label, LoadSignature(s)};
    }
    if (kind == "smooth_trapezoid") {
        detail::reject_unknown_fields(
            record, {"label", "kind", "amplitude", "duration", "rise", "fall"}, context);
        SmoothTrapezoid s;
        s.amplitude = detail::require_number(record, "amplitude", context);
        s.duration = detail::require_number(record, "duration", context);
        s.rise = detail::require_number(record, "rise", context);
        s.fall = detail::require_number(record, "fall", context);
        return {label, LoadSignature(s)};
    }
    if (kind == "double_pulse") {
        detail::reject_unknown_fields(
            record, {"label", "kind", "amplitude", "amplitude2", "pulse_width", "separation"},
            context);
        DoublePulse s;
        s.amplitude = detail::require_number(record, "amplitude", context);
        s.amplitude2 = detail::optional_number(record, "amplitude2", s.amplitude, context);
        s.pulse_width = detail::require_number(record, "pulse_width", context);
        s.separation = detail::optional_number(record, "separation", 0.0, context);
        return {label, LoadSignature(s)};
    }
    if (kind == "piecewise_polynomial") {
        detail::reject_unknown_fields(record, {"label", "kind", "pieces"}, context);
        if (!record.contains("pieces") || !record["pieces"].is_array())
            throw ParseError(context + ": needs an array 'pieces'");
        PiecewisePolynomial s;
        std::size_t piece_no = 0;
        for (const auto& piece_json : record["pieces"]) {
            ++piece_no;
            const std::string piece_ctx =
                context + " piece #" + std::to_string(piece_no);
            if (!piece_json.is_object()) throw ParseError(piece_ctx + ": expected an object");
            detail::reject_unknown_fields(piece_json, {"end", "coefficients"}, piece_ctx);
            PolynomialPiece piece;
            piece.end = detail::require_number(piece_json, "end", piece_ctx);
            if (!piece_json.contains("coefficients") || !piece_json["coefficients"].is_array())
                throw ParseError(piece_ctx + ": needs an array 'coefficients'");
            for (const auto& c : piece_json["coefficients"]) {
                if (!c.is_number())
                    throw ParseError(piece_ctx + ": coefficients must be numbers");
                piece.coefficients.push_back(c.get<double>());
            }
            s.pieces.push_back(std::move(piece));
        }
        return {label, LoadSignature(s)};
    }
    throw ParseError(context + ": unknown kind '" + kind +
                     "' (expected raised_cosine_pulse, smooth_trapezoid, double_pulse or "
                     "piecewise_polynomial)");
}

inline SignatureCatalog parse_catalog_json(const nlohmann::json& doc) {
    if (!doc.is_array()) throw ParseError("catalog: top level must be an array of signatures");
    std::vector<SignatureCatalog::Entry> entries;
    for (std::size_t i = 0; i < doc.size(); ++i)
        entries.push_back(parse_signature_record(doc[i], i));
    return SignatureCatalog(std::move(entries));
}

/// Parses a catalog document (JSON, // and /* */ comments allowed). Parse
/// errors carry the line/column; validation errors name the signature and
/// breakpoint.
inline SignatureCatalog parse_catalog(const std::string& text) {
    return parse_catalog_json(detail::parse_json_document(text, "catalog"));
}

inline SignatureCatalog parse_catalog(std::istream& in) {
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_catalog(buffer.str());
}

}  // namespace nilmbound
