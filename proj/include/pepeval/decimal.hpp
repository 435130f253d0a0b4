#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace pepeval {

/// Exact decimal number stored as mantissa * 10^-scale.
///
/// Gold answers and extracted values are kept in this form so that "3.00",
/// "3" and "3.0" are a single canonical value and no binary-float drift can
/// creep in before answers are compared. Mantissas are capped at 18
/// significant digits; parsing fails beyond that.
class Decimal {
public:
    Decimal() = default;

    static Decimal from_int(std::int64_t v) {
        Decimal d;
        d.mantissa_ = v;
        d.scale_ = 0;
        return d;
    }

    /// Parses [+-]?digits[.digits]. Thousands separators are not accepted
    /// here; strip formatting first (see normalize_numeric).
    static std::optional<Decimal> parse(std::string_view text) {
        size_t i = 0;
        bool neg = false;
        if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
            neg = text[i] == '-';
            ++i;
        }
        unsigned __int128 mant = 0;
        int digits = 0, scale = 0;
        bool seen_dot = false, any_digit = false;
        for (; i < text.size(); ++i) {
            char c = text[i];
            if (c == '.') {
                if (seen_dot) return std::nullopt;
                seen_dot = true;
                continue;
            }
            if (c < '0' || c > '9') return std::nullopt;
            any_digit = true;
            mant = mant * 10 + static_cast<unsigned>(c - '0');
            ++digits;
            if (seen_dot) ++scale;
            if (digits > 18) return std::nullopt;
        }
        if (!any_digit) return std::nullopt;
        Decimal d;
        d.mantissa_ = neg ? -static_cast<std::int64_t>(mant) : static_cast<std::int64_t>(mant);
        d.scale_ = scale;
        d.normalize();
        return d;
    }

    /// num / den as a decimal; exact when the expansion terminates within
    /// max_frac_digits, truncated otherwise. Division by zero fails.
    static std::optional<Decimal> from_fraction(const Decimal& num, const Decimal& den,
                                                int max_frac_digits = 12) {
        if (den.mantissa_ == 0) return std::nullopt;
        const bool neg = (num.mantissa_ < 0) != (den.mantissa_ < 0);
        unsigned __int128 n = num.mantissa_ < 0 ? -static_cast<__int128>(num.mantissa_)
                                                : static_cast<__int128>(num.mantissa_);
        unsigned __int128 d = den.mantissa_ < 0 ? -static_cast<__int128>(den.mantissa_)
                                                : static_cast<__int128>(den.mantissa_);
        // value = (n / d) * 10^(den.scale - num.scale)
        int exp10 = den.scale_ - num.scale_;
        unsigned __int128 mant = n / d;
        unsigned __int128 rem = n % d;
        int frac = 0;
        while (rem != 0 && frac < max_frac_digits) {
            rem *= 10;
            mant = mant * 10 + rem / d;
            rem %= d;
            ++frac;
            if (mant > static_cast<unsigned __int128>(999'999'999'999'999'999ULL)) return std::nullopt;
        }
        int scale = frac - exp10;
        while (scale < 0) {
            mant *= 10;
            ++scale;
            if (mant > static_cast<unsigned __int128>(999'999'999'999'999'999ULL)) return std::nullopt;
        }
        Decimal out;
        out.mantissa_ = neg ? -static_cast<std::int64_t>(mant) : static_cast<std::int64_t>(mant);
        out.scale_ = scale;
        out.normalize();
        return out;
    }

    /// Divides by 10^digits (percent handling: shifted_down(2)).
    std::optional<Decimal> shifted_down(int digits) const {
        if (scale_ + digits > 24) return std::nullopt;
        Decimal d = *this;
        d.scale_ += digits;
        d.normalize();
        return d;
    }

    /// Canonical rendering: no sign on zero, no trailing fractional zeros.
    std::string to_string() const {
        std::int64_t m = mantissa_;
        bool neg = m < 0;
        std::string digits;
        std::uint64_t u = neg ? static_cast<std::uint64_t>(-(m + 1)) + 1 : static_cast<std::uint64_t>(m);
        do {
            digits.push_back(static_cast<char>('0' + u % 10));
            u /= 10;
        } while (u != 0);
        while (static_cast<int>(digits.size()) <= scale_) digits.push_back('0');
        std::string out;
        if (neg) out.push_back('-');
        for (int i = static_cast<int>(digits.size()) - 1; i >= 0; --i) {
            out.push_back(digits[static_cast<size_t>(i)]);
            if (i == scale_ && scale_ > 0) out.push_back('.');
        }
        return out;
    }

    double to_double() const { return static_cast<double>(mantissa_) / std::pow(10.0, scale_); }

    bool is_zero() const { return mantissa_ == 0; }
    bool is_negative() const { return mantissa_ < 0; }
    std::int64_t mantissa() const { return mantissa_; }
    int scale() const { return scale_; }

    friend bool operator==(const Decimal& a, const Decimal& b) {
        return a.mantissa_ == b.mantissa_ && a.scale_ == b.scale_;
    }
    friend bool operator!=(const Decimal& a, const Decimal& b) { return !(a == b); }

private:
    void normalize() {
        if (mantissa_ == 0) {
            scale_ = 0;
            return;
        }
        while (scale_ > 0 && mantissa_ % 10 == 0) {
            mantissa_ /= 10;
            --scale_;
        }
    }

    std::int64_t mantissa_ = 0;
    std::int32_t scale_ = 0;
};

}  // namespace pepeval
