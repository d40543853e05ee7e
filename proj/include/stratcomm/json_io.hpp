#pragma once

#include <json.hpp>

#include <initializer_list>
#include <optional>
#include <string>

#include "stratcomm/errors.hpp"
#include "stratcomm/types.hpp"

namespace stratcomm {

/// Raised for malformed configuration input. The CLI maps these to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace jsonio {

using nlohmann::json;

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known) throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
}

inline double require_number(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + " is missing key '" + key + "'");
    if (!j.at(key).is_number()) throw ConfigError(where + "." + key + " must be a number");
    return j.at(key).get<double>();
}

/// Canonical JSON form of ModelParams: keys sigma_x2, rho_xtheta, r_theta and
/// the all-or-none side-information triple rho_xw, rho_thetaw, r_w.
inline ModelParams model_from_json(const json& j) {
    check_keys(j, {"sigma_x2", "rho_xtheta", "r_theta", "rho_xw", "rho_thetaw", "r_w"}, "model");
    ModelParams p;
    p.sigma_x2 = require_number(j, "sigma_x2", "model");
    p.rho_xtheta = require_number(j, "rho_xtheta", "model");
    p.r_theta = require_number(j, "r_theta", "model");
    const int si = int(j.contains("rho_xw")) + int(j.contains("rho_thetaw")) + int(j.contains("r_w"));
    if (si != 0 && si != 3)
        throw ConfigError("model side-information keys rho_xw, rho_thetaw, r_w are all-or-none");
    if (si == 3) {
        p.rho_xw = require_number(j, "rho_xw", "model");
        p.rho_thetaw = require_number(j, "rho_thetaw", "model");
        p.r_w = require_number(j, "r_w", "model");
    }
    return p;
}

inline json model_to_json(const ModelParams& p) {
    json j{{"sigma_x2", p.sigma_x2}, {"rho_xtheta", p.rho_xtheta}, {"r_theta", p.r_theta}};
    if (p.has_si()) {
        j["rho_xw"] = *p.rho_xw;
        j["rho_thetaw"] = *p.rho_thetaw;
        j["r_w"] = *p.r_w;
    }
    return j;
}

inline ChannelParams channel_from_json(const json& j) {
    check_keys(j, {"p_t", "sigma_n2"}, "channel");
    ChannelParams ch;
    ch.p_t = require_number(j, "p_t", "channel");
    ch.sigma_n2 = require_number(j, "sigma_n2", "channel");
    return ch;
}

inline json channel_to_json(const ChannelParams& ch) {
    return json{{"p_t", ch.p_t}, {"sigma_n2", ch.sigma_n2}};
}

inline json distortions_to_json(const DistortionPair& d) {
    return json{{"d_e", d.d_e}, {"d_d", d.d_d}};
}

inline json equilibrium_to_json(const EquilibriumReport& r) {
    return json{{"alpha", r.alpha},
                {"decoder_y", r.decoder_y},
                {"decoder_w", r.decoder_w},
                {"distortions", distortions_to_json(r.distortions)},
                {"a_value", r.a_value},
                {"method", r.method == SolveMethod::closed_form ? "closed_form" : "numeric"}};
}

inline json strategies_to_json(const LinearStrategyPair& s) {
    return json{{"enc_scale", s.enc_scale},
                {"enc_alpha", s.enc_alpha},
                {"enc_w", s.enc_w},
                {"dec_y", s.dec_y},
                {"dec_w", s.dec_w}};
}

inline json optional_to_json(const std::optional<double>& v) {
    if (v.has_value()) return json(*v);
    return json(nullptr);
}

}  // namespace jsonio
}  // namespace stratcomm
