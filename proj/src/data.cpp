#include "surplus/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace surplus {

ObservationSet::ObservationSet(std::vector<double> features, int dim, std::vector<double> prices,
                               std::vector<double> outcomes, PriceSupport support)
    : features_(std::move(features)),
      prices_(std::move(prices)),
      outcomes_(std::move(outcomes)),
      n_(static_cast<int>(prices_.size())),
      dim_(dim),
      support_(support) {
    validate();
}

void ObservationSet::validate() const {
    if (n_ < 1) throw std::invalid_argument("ObservationSet: need at least one observation");
    if (dim_ < 1) throw std::invalid_argument("ObservationSet: need at least one feature column");
    if (features_.size() != static_cast<size_t>(n_) * dim_)
        throw std::invalid_argument("ObservationSet: feature matrix shape mismatch");
    if (outcomes_.size() != static_cast<size_t>(n_))
        throw std::invalid_argument("ObservationSet: outcome vector length mismatch");
    if (!(support_.lo < support_.hi))
        throw std::invalid_argument("ObservationSet: price support must be a nonempty interval");
    if (!all_finite(features_))
        throw std::invalid_argument("ObservationSet: non-finite feature entry");
    for (int i = 0; i < n_; ++i) {
        if (!std::isfinite(prices_[i]) || !support_.contains(prices_[i]))
            throw std::invalid_argument("ObservationSet: price outside support at row " +
                                        std::to_string(i));
        if (outcomes_[i] != 0.0 && outcomes_[i] != 1.0)
            throw std::invalid_argument("ObservationSet: outcome not in {0,1} at row " +
                                        std::to_string(i));
    }
}

ObservationSet ObservationSet::subset(std::span<const int> rows) const {
    std::vector<double> f, p, y;
    f.reserve(rows.size() * dim_);
    p.reserve(rows.size());
    y.reserve(rows.size());
    std::vector<std::string> seg;
    for (int i : rows) {
        if (i < 0 || i >= n_) throw std::invalid_argument("subset: row index out of range");
        auto xi = x(i);
        f.insert(f.end(), xi.begin(), xi.end());
        p.push_back(prices_[i]);
        y.push_back(outcomes_[i]);
        if (!segments_.empty()) seg.push_back(segments_[i]);
    }
    ObservationSet out(std::move(f), dim_, std::move(p), std::move(y), support_);
    out.segments_ = std::move(seg);
    return out;
}

ObservationSet ObservationSet::filter_segment(const std::string& label) const {
    if (segments_.empty())
        throw std::invalid_argument("filter_segment: dataset has no segment column");
    std::vector<int> rows;
    for (int i = 0; i < n_; ++i)
        if (segments_[i] == label) rows.push_back(i);
    if (rows.empty())
        throw DegenerateDataError("filter_segment: no rows with segment '" + label + "'");
    return subset(rows);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) {
        // trim whitespace and a possible trailing \r
        size_t b = cur.find_first_not_of(" \t\r");
        size_t e = cur.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : cur.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const std::string& what, int row) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw std::invalid_argument("CSV: cannot parse " + what + " value '" + s + "' at data row " +
                                    std::to_string(row));
    return v;
}

}  // namespace

ObservationSet ObservationSet::from_csv(const std::string& path,
                                        std::optional<PriceSupport> support) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open CSV file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("CSV: empty file: " + path);
    const auto header = split_csv_line(line);

    // locate x0..x{d-1}, p, y, optional segment
    std::vector<int> xcols;
    int pcol = -1, ycol = -1, segcol = -1;
    for (int j = 0; j < static_cast<int>(header.size()); ++j) {
        const std::string& h = header[j];
        if (h == "p") pcol = j;
        else if (h == "y") ycol = j;
        else if (h == "segment") segcol = j;
        else if (h.size() >= 2 && h[0] == 'x') {
            bool digits = true;
            for (size_t k = 1; k < h.size(); ++k) digits &= (h[k] >= '0' && h[k] <= '9');
            if (digits) {
                int idx = std::stoi(h.substr(1));
                if (idx >= static_cast<int>(xcols.size())) xcols.resize(idx + 1, -1);
                xcols[idx] = j;
            }
        }
    }
    if (pcol < 0) throw std::invalid_argument("CSV: missing required column 'p'");
    if (ycol < 0) throw std::invalid_argument("CSV: missing required column 'y'");
    if (xcols.empty()) throw std::invalid_argument("CSV: no feature columns x0..x{d-1} found");
    for (size_t k = 0; k < xcols.size(); ++k)
        if (xcols[k] < 0)
            throw std::invalid_argument("CSV: feature columns not contiguous, missing x" +
                                        std::to_string(k));
    const int d = static_cast<int>(xcols.size());

    std::vector<double> f, p, y;
    std::vector<std::string> seg;
    int row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() < header.size())
            throw std::invalid_argument("CSV: row " + std::to_string(row) + " has " +
                                        std::to_string(cells.size()) + " cells, expected " +
                                        std::to_string(header.size()));
        for (int k = 0; k < d; ++k) f.push_back(parse_double(cells[xcols[k]], "x" + std::to_string(k), row));
        p.push_back(parse_double(cells[pcol], "p", row));
        y.push_back(parse_double(cells[ycol], "y", row));
        if (segcol >= 0) seg.push_back(cells[segcol]);
        ++row;
    }
    if (row == 0) throw std::invalid_argument("CSV: no data rows in " + path);

    PriceSupport s;
    if (support) {
        s = *support;
    } else {
        const auto [lo_it, hi_it] = std::minmax_element(p.begin(), p.end());
        s.lo = *lo_it;
        s.hi = 1.05 * *hi_it;
        if (!(s.lo < s.hi)) s.hi = s.lo + 1.0;  // all-equal prices: keep a valid interval
    }
    ObservationSet out(std::move(f), d, std::move(p), std::move(y), s);
    out.segments_ = std::move(seg);
    return out;
}

PriceGrid::PriceGrid(Kind kind, std::vector<double> nodes, std::vector<double> weights)
    : kind_(kind), nodes_(std::move(nodes)), weights_(std::move(weights)) {
    if (nodes_.size() < 2) throw std::invalid_argument("PriceGrid: need at least 2 nodes");
    for (size_t g = 1; g < nodes_.size(); ++g)
        if (!(nodes_[g] > nodes_[g - 1]))
            throw std::invalid_argument("PriceGrid: nodes must be strictly increasing");
}

PriceGrid PriceGrid::uniform(double lo, double hi, int nodes) {
    if (!(lo < hi)) throw std::invalid_argument("PriceGrid: lo must be below hi");
    if (nodes < 2) throw std::invalid_argument("PriceGrid: need at least 2 nodes");
    std::vector<double> z(nodes), w(nodes);
    const double h = (hi - lo) / (nodes - 1);
    for (int g = 0; g < nodes; ++g) {
        z[g] = lo + h * g;
        w[g] = (g == 0 || g == nodes - 1) ? h / 2.0 : h;
    }
    z.back() = hi;
    return PriceGrid(Kind::trapezoid, std::move(z), std::move(w));
}

PriceGrid PriceGrid::piecewise(double lo, double mid, double hi, int nodes_lo, int nodes_hi) {
    if (!(lo < mid && mid < hi)) throw std::invalid_argument("PriceGrid: need lo < mid < hi");
    const PriceGrid a = uniform(lo, mid, nodes_lo);
    const PriceGrid b = uniform(mid, hi, nodes_hi);
    std::vector<double> z = a.nodes_;
    std::vector<double> w = a.weights_;
    // merge at mid: the shared node carries both segments' boundary weights
    w.back() += b.weights_.front();
    z.insert(z.end(), b.nodes_.begin() + 1, b.nodes_.end());
    w.insert(w.end(), b.weights_.begin() + 1, b.weights_.end());
    return PriceGrid(Kind::trapezoid, std::move(z), std::move(w));
}

PriceGrid PriceGrid::counting(std::vector<double> points) {
    std::vector<double> w(points.size(), 1.0);
    return PriceGrid(Kind::counting, std::move(points), std::move(w));
}

}  // namespace surplus
