#pragma once

#include <cstddef>
#include <istream>
#include <memory>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "yieldcast/core/error.hpp"
#include "yieldcast/core/text.hpp"
#include "yieldcast/models/spec.hpp"

namespace yieldcast::models {

/// Learned state of one model family. Immutable after fitting.
class Regressor {
public:
    virtual ~Regressor() = default;
    virtual Family family() const = 0;
    virtual double predict_row(std::span<const double> x) const = 0;
    /// Family-specific body of the model file.
    virtual void save(std::ostream& out) const = 0;
};

namespace io {

/// Line-oriented tokens for the model file body.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    std::string token() {
        std::string t;
        if (!(in_ >> t)) throw ParseError("model file truncated");
        return t;
    }

    void expect(std::string_view keyword) {
        const auto t = token();
        if (t != keyword) throw ParseError("model file: expected '" + std::string(keyword) + "', got '" + t + "'");
    }

    double number() {
        const auto t = token();
        if (t == "nan") return std::nan("");
        if (t == "inf") return INFINITY;
        if (t == "-inf") return -INFINITY;
        const auto v = parse_double(t);
        if (!v) throw ParseError("model file: expected number, got '" + t + "'");
        return *v;
    }

    long long integer() {
        const auto t = token();
        const auto v = parse_int(t);
        if (!v) throw ParseError("model file: expected integer, got '" + t + "'");
        return *v;
    }

    std::size_t count() {
        const auto v = integer();
        if (v < 0) throw ParseError("model file: negative count");
        return static_cast<std::size_t>(v);
    }

    std::vector<double> numbers(std::size_t n) {
        std::vector<double> v(n);
        for (auto& x : v) x = number();
        return v;
    }

    std::istream& stream() { return in_; }

private:
    std::istream& in_;
};

inline void write_numbers(std::ostream& out, std::span<const double> v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out << ' ';
        out << format_double(v[i]);
    }
    out << '\n';
}

} // namespace io

} // namespace yieldcast::models
