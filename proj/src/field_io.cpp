#include "gexp/gpde.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>

namespace gexp {

static_assert(std::endian::native == std::endian::little, "binary field dump assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'G', 'E', 'X', 'P', 'V', 'F', '0', '1'};

template <typename T>
void put(std::ostream& out, T v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in)
{
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in)
        throw std::runtime_error("read_field_binary: truncated input");
    return v;
}

void put_number(std::ostream& out, double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
}

} // namespace

void write_field_csv(const ValueField& field, std::ostream& out, int time_stride)
{
    if (time_stride < 1)
        throw std::invalid_argument("write_field_csv: stride must be >= 1");
    const int dims = field.n_intervals() - 1;
    out << "t";
    for (int d = 0; d < dims; ++d)
        out << ",x" << d + 1;
    out << ",x,v,dv,d2v\n";

    const auto& grid = field.grid();
    const int nx = grid.n_x;
    Eigen::ArrayXXd grad, hess;
    for (int k = 0; k < field.n_intervals(); ++k) {
        const auto& iv = field.interval(k);
        for (std::size_t p = 0; p < iv.slabs.size(); ++p) {
            const auto& slab = iv.slabs[p];
            node_derivatives(slab.values, grid.dx(), grad, hess);
            std::vector<double> params(iv.param_dims);
            std::size_t rem = p;
            for (int d = iv.param_dims - 1; d >= 0; --d) {
                params[d] = grid.x(static_cast<int>(rem % nx));
                rem /= nx;
            }
            for (int s = 0; s < slab.slices(); ++s) {
                if (s % time_stride != 0 && s != slab.slices() - 1)
                    continue;
                for (int j = 0; j < nx; ++j) {
                    put_number(out, slab.slice_time(s));
                    // Parameters not yet observed in this interval are left empty.
                    for (int d = 0; d < dims; ++d) {
                        out << ',';
                        if (d < iv.param_dims)
                            put_number(out, params[d]);
                    }
                    out << ',';
                    put_number(out, grid.x(j));
                    out << ',';
                    put_number(out, slab.values(j, s));
                    out << ',';
                    put_number(out, grad(j, s));
                    out << ',';
                    put_number(out, hess(j, s));
                    out << '\n';
                }
            }
        }
    }
}

void write_field_binary(const ValueField& field, std::ostream& out)
{
    const auto& grid = field.grid();
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(field.n_intervals()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(grid.n_x));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(grid.store_per_unit));
    put<double>(out, grid.x_max);
    put<double>(out, grid.cfl);
    put<double>(out, field.band().lo());
    put<double>(out, field.band().hi());
    for (double t : field.times())
        put<double>(out, t);
    for (int k = 0; k < field.n_intervals(); ++k) {
        const auto& iv = field.interval(k);
        put<double>(out, iv.t_begin);
        put<double>(out, iv.t_end);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(iv.param_dims));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(iv.slabs.front().slices()));
        for (const auto& slab : iv.slabs) {
            put<std::int32_t>(out, slab.fine_steps);
            out.write(reinterpret_cast<const char*>(slab.values.data()),
                      static_cast<std::streamsize>(slab.values.size() * sizeof(double)));
        }
    }
}

ValueField read_field_binary(std::istream& in)
{
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("read_field_binary: bad magic");
    const auto n_int = get<std::uint32_t>(in);
    SpaceTimeGrid grid;
    grid.n_x = static_cast<int>(get<std::uint32_t>(in));
    grid.store_per_unit = static_cast<int>(get<std::uint32_t>(in));
    grid.x_max = get<double>(in);
    grid.cfl = get<double>(in);
    const double lo = get<double>(in);
    const double hi = get<double>(in);
    if (n_int < 1 || n_int > 3)
        throw std::runtime_error("read_field_binary: bad interval count");
    grid.validate();
    std::vector<double> times(n_int);
    for (auto& t : times)
        t = get<double>(in);

    std::vector<ValueField::Interval> intervals(n_int);
    std::size_t count = 1;
    for (std::uint32_t k = 0; k < n_int; ++k) {
        auto& iv = intervals[k];
        iv.t_begin = get<double>(in);
        iv.t_end = get<double>(in);
        iv.param_dims = static_cast<int>(get<std::uint32_t>(in));
        const auto slices = get<std::uint32_t>(in);
        if (iv.param_dims != static_cast<int>(k) || slices < 2)
            throw std::runtime_error("read_field_binary: bad interval header");
        iv.slabs.resize(count);
        for (auto& slab : iv.slabs) {
            slab.t_begin = iv.t_begin;
            slab.t_end = iv.t_end;
            slab.fine_steps = get<std::int32_t>(in);
            slab.values.resize(grid.n_x, slices);
            in.read(reinterpret_cast<char*>(slab.values.data()),
                    static_cast<std::streamsize>(slab.values.size() * sizeof(double)));
            if (!in)
                throw std::runtime_error("read_field_binary: truncated input");
        }
        count *= static_cast<std::size_t>(grid.n_x);
    }
    return ValueField(std::move(times), grid, Band::scalar(lo, hi), std::move(intervals));
}

} // namespace gexp
