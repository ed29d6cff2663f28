#include "pmbm/errors.hpp"
#include "pmbm/pmbm.hpp"

#include <json.hpp>

#include <cmath>

namespace pmbm {

using nlohmann::json;

namespace {

json number(double v) {
    if (std::isnan(v)) throw ModelError("cannot serialize NaN");
    if (v == kNegInf) return nullptr;
    return v;
}

double read_number(const json& j) {
    if (j.is_null()) return kNegInf;
    if (!j.is_number()) throw ModelError("expected a number");
    return j.get<double>();
}

json vec(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Vector read_vec(const json& j) {
    if (!j.is_array()) throw ModelError("expected an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

json mat(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix read_mat(const json& j) {
    if (!j.is_array()) throw ModelError("expected a matrix");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j[0].size());
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw ModelError("ragged matrix");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

json gaussian(const GaussianDensity& d) { return {{"mean", vec(d.mean)}, {"cov", mat(d.covariance)}}; }

GaussianDensity read_gaussian(const json& j) {
    GaussianDensity d{read_vec(j.at("mean")), read_mat(j.at("cov"))};
    if (d.covariance.rows() != d.dim() || d.covariance.cols() != d.dim())
        throw ModelError("covariance does not match mean dimension");
    return d;
}

json pairs(const PairSet& s) {
    json a = json::array();
    for (const auto& p : s) a.push_back({p.step, p.index});
    return a;
}

PairSet read_pairs(const json& j) {
    PairSet s;
    for (const auto& p : j) s.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
    if (!std::is_sorted(s.begin(), s.end())) throw ModelError("measurement pairs must be sorted");
    return s;
}

}  // namespace

std::string to_json(const PmbmDensity& d, int indent) {
    json doc;
    doc["version"] = kStateFormatVersion;

    json ppp = json::array();
    for (const auto& c : d.ppp) ppp.push_back({{"log_weight", number(c.log_weight)}, {"density", gaussian(c.density)}});
    doc["ppp"] = std::move(ppp);

    json trees = json::array();
    for (const auto& t : d.trees) {
        json hyps = json::array();
        for (const auto& h : t.hypotheses)
            hyps.push_back({{"log_weight", number(h.log_weight)},
                            {"existence", h.existence},
                            {"density", gaussian(h.density)},
                            {"measurements", pairs(h.measurements)},
                            {"parent", h.parent}});
        trees.push_back({{"birth_step", t.birth_step}, {"hypotheses", std::move(hyps)}});
    }
    doc["trees"] = std::move(trees);

    json clutter = json::array();
    for (const auto& t : d.clutter) {
        json hyps = json::array();
        for (const auto& h : t.hypotheses)
            hyps.push_back({{"log_weight", number(h.log_weight)},
                            {"measurements", pairs(h.measurements)},
                            {"parent", h.parent}});
        clutter.push_back({{"hypotheses", std::move(hyps)}});
    }
    doc["clutter"] = std::move(clutter);

    json globals = json::array();
    for (const auto& g : d.globals)
        globals.push_back({{"log_weight", number(g.log_weight)},
                           {"clutter", g.clutter},
                           {"bernoulli", g.bernoulli},
                           {"dropped", pairs(g.dropped)}});
    doc["globals"] = std::move(globals);

    json history = json::array();
    for (const auto& r : d.history) history.push_back({r.step, r.count});
    doc["history"] = std::move(history);

    return doc.dump(indent);
}

PmbmDensity from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ModelError(std::string("malformed state document: ") + e.what());
    }
    try {
        const int version = doc.at("version").get<int>();
        if (version != kStateFormatVersion)
            throw ModelError("unsupported state format version " + std::to_string(version));

        PmbmDensity d;
        for (const auto& c : doc.at("ppp"))
            d.ppp.push_back({read_number(c.at("log_weight")), read_gaussian(c.at("density"))});
        for (const auto& t : doc.at("trees")) {
            BernoulliTree tree{t.at("birth_step").get<int>(), {}};
            for (const auto& h : t.at("hypotheses"))
                tree.hypotheses.push_back({read_number(h.at("log_weight")), h.at("existence").get<double>(),
                                           read_gaussian(h.at("density")), read_pairs(h.at("measurements")),
                                           h.at("parent").get<int>()});
            d.trees.push_back(std::move(tree));
        }
        for (const auto& t : doc.at("clutter")) {
            ClutterTree tree;
            for (const auto& h : t.at("hypotheses"))
                tree.hypotheses.push_back(
                    {read_number(h.at("log_weight")), read_pairs(h.at("measurements")), h.at("parent").get<int>()});
            d.clutter.push_back(std::move(tree));
        }
        for (const auto& g : doc.at("globals"))
            d.globals.push_back({read_number(g.at("log_weight")), g.at("clutter").get<std::vector<int>>(),
                                 g.at("bernoulli").get<std::vector<int>>(), read_pairs(g.at("dropped"))});
        for (const auto& r : doc.at("history")) d.history.push_back({r.at(0).get<int>(), r.at(1).get<int>()});

        for (const auto& g : d.globals)
            if (g.clutter.size() != d.clutter.size() || g.bernoulli.size() != d.trees.size())
                throw ModelError("global hypothesis does not select one local hypothesis per tree");
        if (!d.all_globals_valid()) throw ModelError("global hypotheses do not partition the measurement history");
        return d;
    } catch (const json::exception& e) {
        throw ModelError(std::string("malformed state document: ") + e.what());
    } catch (const RangeError& e) {
        throw ModelError(std::string("invalid state document: ") + e.what());
    }
}

}  // namespace pmbm
