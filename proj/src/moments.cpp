#include "pathcor/moments.hpp"

#include "pathcor/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace pathcor {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

double parse_field(std::string_view field, std::size_t row, std::size_t col) {
    const std::string_view t = trim(field);
    if (t.empty()) throw ParseError("empty field at row " + std::to_string(row) + ", column " + std::to_string(col), row, col);
    double value = 0.0;
    const auto* first = t.data();
    const auto* last = t.data() + t.size();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
        throw ParseError("cannot parse \"" + std::string(t) + "\" as a number at row " + std::to_string(row) +
                             ", column " + std::to_string(col),
                         row, col);
    }
    if (!std::isfinite(value)) {
        throw ParseError("non-finite value at row " + std::to_string(row) + ", column " + std::to_string(col), row, col);
    }
    return value;
}

}  // namespace

void Dataset::validate() const {
    if (p < 1 || r < 1) throw InputError("p and r must be positive");
    if (rows.cols() != p + r) {
        throw InputError("dataset has " + std::to_string(rows.cols()) + " columns but p + r = " +
                         std::to_string(p + r));
    }
    if (rows.rows() < 2) throw InputError("at least two observations are required");
    if (!rows.allFinite()) throw InputError("dataset contains non-finite entries");
}

Dataset read_csv(std::istream& in, Eigen::Index p, Eigen::Index r) {
    if (p < 1 || r < 1) throw InputError("p and r must be positive");
    const auto width = static_cast<std::size_t>(p + r);
    std::vector<double> values;
    std::string line;
    std::size_t row = 0;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        std::string_view rest(line);
        std::size_t col = 0;
        while (true) {
            const auto comma = rest.find(',');
            ++col;
            if (col > width) {
                throw ParseError("row " + std::to_string(row) + " has more than " + std::to_string(width) +
                                     " columns",
                                 row, col);
            }
            values.push_back(parse_field(rest.substr(0, comma), row, col));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (col != width) {
            throw ParseError("row " + std::to_string(row) + " has " + std::to_string(col) + " columns, expected " +
                                 std::to_string(width),
                             row, col);
        }
        ++n;
    }
    Dataset data;
    data.p = p;
    data.r = r;
    data.rows = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
    return data;
}

Dataset read_csv_file(const std::string& path, Eigen::Index p, Eigen::Index r) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return read_csv(in, p, r);
}

void write_csv(std::ostream& out, const Dataset& data) {
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (Eigen::Index i = 0; i < data.rows.rows(); ++i) {
        for (Eigen::Index j = 0; j < data.rows.cols(); ++j) {
            if (j > 0) out << ',';
            out << data.rows(i, j);
        }
        out << '\n';
    }
}

Matrix SampleMoments::joint() const {
    const Eigen::Index np = p();
    const Eigen::Index nr = r();
    Matrix out(np + nr, np + nr);
    out.topLeftCorner(np, np) = s_x;
    out.bottomRightCorner(nr, nr) = s_y;
    out.bottomLeftCorner(nr, np) = s_yx;
    out.topRightCorner(np, nr) = s_yx.transpose();
    return out;
}

SampleMoments compute_moments(const Dataset& data) {
    data.validate();
    const auto n = static_cast<double>(data.n());
    const Vector mean = data.rows.colwise().mean();
    const Matrix centered = data.rows.rowwise() - mean.transpose();
    Matrix cov = (centered.transpose() * centered) / n;
    cov = 0.5 * (cov + cov.transpose()).eval();

    SampleMoments m;
    m.n = data.n();
    m.mean_x = mean.head(data.p);
    m.mean_y = mean.tail(data.r);
    m.s_x = cov.topLeftCorner(data.p, data.p);
    m.s_y = cov.bottomRightCorner(data.r, data.r);
    m.s_yx = cov.bottomLeftCorner(data.r, data.p);
    return m;
}

SampleMoments moments_from_covariance(const Matrix& joint_xy, Eigen::Index p, Eigen::Index n) {
    const Eigen::Index r = joint_xy.rows() - p;
    if (p < 1 || r < 1 || joint_xy.cols() != joint_xy.rows()) {
        throw InputError("joint covariance shape does not match p");
    }
    SampleMoments m;
    m.n = n;
    m.mean_x = Vector::Zero(p);
    m.mean_y = Vector::Zero(r);
    m.s_x = joint_xy.topLeftCorner(p, p);
    m.s_y = joint_xy.bottomRightCorner(r, r);
    m.s_yx = joint_xy.bottomLeftCorner(r, p);
    return m;
}

Matrix standardized_cross_cov(const SampleMoments& m) {
    const Matrix sx = linalg::inv_sqrt_spd(m.s_x, "sample covariance of X (s_x)");
    const Matrix sy = linalg::inv_sqrt_spd(m.s_y, "sample covariance of Y (s_y)");
    return sy * m.s_yx * sx;
}

SampleMoments project_moments(const SampleMoments& m, const Matrix& phi, const Matrix& gamma) {
    SampleMoments out;
    out.n = m.n;
    out.mean_x = phi.transpose() * m.mean_x;
    out.mean_y = gamma.transpose() * m.mean_y;
    out.s_x = phi.transpose() * m.s_x * phi;
    out.s_y = gamma.transpose() * m.s_y * gamma;
    out.s_yx = gamma.transpose() * m.s_yx * phi;
    out.s_x = 0.5 * (out.s_x + out.s_x.transpose()).eval();
    out.s_y = 0.5 * (out.s_y + out.s_y.transpose()).eval();
    return out;
}

}  // namespace pathcor
