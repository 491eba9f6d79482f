#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fibound/errors.hpp"
#include "fibound/linalg.hpp"

namespace fibound {

enum class TransformTag { power, abs_value, log_abs, log_abs_squared };

// One scalar output transformation. Power carries its exponent; the log
// kinds clamp |z| from below before taking the logarithm (see TransformSet).
struct TransformKind {
    TransformTag tag = TransformTag::power;
    int power_exponent = 1;  // meaningful only for TransformTag::power

    static TransformKind power(int k) {
        if (k < 1) throw validation_error("power transform requires exponent k >= 1");
        return {TransformTag::power, k};
    }
    static TransformKind abs_value() { return {TransformTag::abs_value, 0}; }
    static TransformKind log_abs() { return {TransformTag::log_abs, 0}; }
    static TransformKind log_abs_squared() { return {TransformTag::log_abs_squared, 0}; }

    bool operator==(const TransformKind&) const = default;

    std::string token() const {
        switch (tag) {
            case TransformTag::power:
                return power_exponent == 1 ? "z" : "z" + std::to_string(power_exponent);
            case TransformTag::abs_value: return "abs";
            case TransformTag::log_abs: return "logabs";
            case TransformTag::log_abs_squared: return "logabs2";
        }
        return "?";
    }
};

// Ordered bank of output transformations. Immutable after construction and
// cheap to copy; evaluate() is pure, so concurrent use needs no locking.
class TransformSet {
public:
    explicit TransformSet(std::vector<TransformKind> kinds, double log_guard_epsilon = 1e-100)
        : kinds_(std::move(kinds)), log_guard_(log_guard_epsilon) {
        if (kinds_.empty()) throw validation_error("transform set must contain at least one kind");
        if (!(log_guard_ > 0.0)) throw validation_error("log_guard_epsilon must be positive");
        for (std::size_t i = 0; i < kinds_.size(); ++i)
            for (std::size_t j = i + 1; j < kinds_.size(); ++j)
                if (kinds_[i] == kinds_[j])
                    throw validation_error("duplicate transform '" + kinds_[i].token() +
                                           "': the bank covariance would be singular by construction");
    }

    std::size_t size() const { return kinds_.size(); }
    const std::vector<TransformKind>& kinds() const { return kinds_; }
    double log_guard_epsilon() const { return log_guard_; }

    // Writes phi(z) into out (length size()). Component l depends only on
    // kinds()[l] and z.
    void evaluate(double z, std::span<double> out) const {
        if (!std::isfinite(z)) throw invalid_sample_error("non-finite sample passed to transform bank");
        const double az = std::abs(z);
        double log_az = 0.0;
        bool have_log = false;
        for (std::size_t l = 0; l < kinds_.size(); ++l) {
            const TransformKind& k = kinds_[l];
            switch (k.tag) {
                case TransformTag::power: {
                    double p = z;
                    for (int e = 1; e < k.power_exponent; ++e) p *= z;
                    out[l] = p;
                    break;
                }
                case TransformTag::abs_value:
                    out[l] = az;
                    break;
                case TransformTag::log_abs:
                case TransformTag::log_abs_squared: {
                    if (!have_log) {
                        log_az = std::log(std::max(az, log_guard_));
                        have_log = true;
                    }
                    out[l] = k.tag == TransformTag::log_abs ? log_az : log_az * log_az;
                    break;
                }
            }
        }
    }

    Vec evaluate(double z) const {
        Vec out(kinds_.size());
        evaluate(z, out);
        return out;
    }

    // First l kinds as their own bank; used for nested-bank comparisons.
    TransformSet prefix(std::size_t l) const {
        return TransformSet(std::vector<TransformKind>(kinds_.begin(), kinds_.begin() + l), log_guard_);
    }

    std::string spec_string() const {
        std::string s;
        for (std::size_t l = 0; l < kinds_.size(); ++l) {
            if (l) s += ',';
            s += kinds_[l].token();
        }
        return s;
    }

private:
    std::vector<TransformKind> kinds_;
    double log_guard_;
};

// The 7-element bank [z, z^2, z^3, z^4, |z|, ln|z|, ln^2|z|].
inline TransformSet standard_transform_set() {
    return TransformSet({TransformKind::power(1), TransformKind::power(2), TransformKind::power(3),
                         TransformKind::power(4), TransformKind::abs_value(), TransformKind::log_abs(),
                         TransformKind::log_abs_squared()});
}

// Comma-separated list over tokens {z, z2, z3, z4, abs, logabs, logabs2},
// order preserved. Used by the --transforms flag and config files.
inline TransformSet parse_transform_spec(std::string_view text) {
    std::vector<TransformKind> kinds;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string_view::npos) comma = text.size();
        std::string_view tok = text.substr(pos, comma - pos);
        while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
        while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
        if (tok == "z") kinds.push_back(TransformKind::power(1));
        else if (tok == "z2") kinds.push_back(TransformKind::power(2));
        else if (tok == "z3") kinds.push_back(TransformKind::power(3));
        else if (tok == "z4") kinds.push_back(TransformKind::power(4));
        else if (tok == "abs") kinds.push_back(TransformKind::abs_value());
        else if (tok == "logabs") kinds.push_back(TransformKind::log_abs());
        else if (tok == "logabs2") kinds.push_back(TransformKind::log_abs_squared());
        else throw parse_error("unknown transform token '" + std::string(tok) + "'");
        pos = comma + 1;
    }
    return TransformSet(std::move(kinds));
}

} // namespace fibound
