#include "clr/data_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace clr {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

bool is_missing(const std::string& cell) {
    const std::string t = trim(cell);
    return t.empty() || t == "?" || t == "NA" || t == "na" || t == "NaN" || t == "nan";
}

double parse_number(const std::string& cell, const std::string& column) {
    const std::string t = trim(cell);
    std::size_t used = 0;
    double v;
    try {
        v = std::stod(t, &used);
    } catch (const std::exception&) {
        throw ParseError("column '" + column + "': cannot parse '" + t + "' as a number");
    }
    if (used != t.size())
        throw ParseError("column '" + column + "': trailing junk in '" + t + "'");
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c == '\r') {
            // swallow
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

int RawTable::col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    throw MissingColumn("no column named '" + name + "'");
}

RawTable read_csv_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    RawTable table;
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    table.header = split_csv_line(line);
    for (auto& h : table.header) h = trim(h);
    while (std::getline(in, line)) {
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != table.header.size())
            throw ParseError(path + ": row with " + std::to_string(cells.size()) +
                             " cells, expected " + std::to_string(table.header.size()));
        table.rows.push_back(std::move(cells));
    }
    return table;
}

PreprocessRecipe builtin_recipe(const std::string& name) {
    PreprocessRecipe r;
    r.name = name;
    if (name == "boston") {
        r.steps = {{RecipeStep::Kind::scale, "", 0, 1, 0}};
        r.target_column = "medv";
        r.constraint_column = "rad";
    } else if (name == "abalone") {
        r.steps = {{RecipeStep::Kind::one_hot, "sex", 0, 1, 0},
                   {RecipeStep::Kind::bin, "diameter", 0.1, 0.2, 10},
                   {RecipeStep::Kind::scale, "", 0, 1, 0}};
        r.target_column = "rings";
        r.constraint_column = "diameter_bin";
    } else if (name == "auto_mpg") {
        r.steps = {{RecipeStep::Kind::drop, "car_name", 0, 1, 0},
                   {RecipeStep::Kind::one_hot, "origin", 0, 1, 0},
                   {RecipeStep::Kind::scale, "", 0, 1, 0}};
        r.target_column = "mpg";
        r.constraint_column = "model_year";
    } else if (name == "generic") {
        r.steps = {{RecipeStep::Kind::scale, "", 0, 1, 0}};
        r.target_column = "target";
    } else {
        throw UnknownRecipe("no recipe named '" + name + "'");
    }
    return r;
}

Scaler fit_scaler(const Matd& X) {
    if (X.rows() == 0) throw InsufficientData("fit_scaler: no rows");
    Scaler s;
    s.lo = X.colwise().minCoeff().transpose();
    s.hi = X.colwise().maxCoeff().transpose();
    return s;
}

Matd Scaler::apply(const Matd& X) const {
    if (X.cols() != lo.size()) throw DimensionMismatch("Scaler::apply: width mismatch");
    Matd out(X.rows(), X.cols());
    for (int c = 0; c < X.cols(); ++c) {
        const double span = hi[c] - lo[c];
        if (span > 0)
            out.col(c) = ((X.col(c).array() - lo[c]) * (2.0 / span) - 1.0).matrix();
        else
            out.col(c).setZero();
    }
    return out;
}

LoadedData load_table(const std::string& path, const PreprocessRecipe& recipe,
                      bool require_target) {
    RawTable table = read_csv_table(path);
    LoadedData out;
    out.recipe = recipe;

    // column drops first so their cells cannot block a row
    for (const auto& step : recipe.steps) {
        if (step.kind != RecipeStep::Kind::drop) continue;
        const int c = table.col(step.column);
        table.header.erase(table.header.begin() + c);
        for (auto& row : table.rows) row.erase(row.begin() + c);
    }

    std::vector<std::vector<std::string>> kept;
    kept.reserve(table.rows.size());
    for (auto& row : table.rows) {
        bool bad = false;
        for (const auto& cell : row)
            if (is_missing(cell)) {
                bad = true;
                break;
            }
        if (bad)
            ++out.n_dropped;
        else
            kept.push_back(std::move(row));
    }
    table.rows = std::move(kept);
    if (table.rows.empty()) throw InsufficientData(path + ": no usable rows");

    // column-major store of the working feature set
    std::vector<std::string> names = table.header;
    std::vector<std::vector<double>> cols(names.size());
    std::vector<bool> numeric(names.size(), true);
    std::vector<std::vector<std::string>> raw_cols(names.size());
    for (std::size_t c = 0; c < names.size(); ++c) {
        raw_cols[c].reserve(table.rows.size());
        for (const auto& row : table.rows) raw_cols[c].push_back(trim(row[c]));
    }

    auto find_name = [&](const std::string& name) {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return static_cast<int>(i);
        throw MissingColumn("no column named '" + name + "'");
    };

    for (const auto& step : recipe.steps) {
        if (step.kind == RecipeStep::Kind::one_hot) {
            const int c = find_name(step.column);
            std::set<std::string> cats(raw_cols[c].begin(), raw_cols[c].end());
            std::vector<std::string> new_names;
            std::vector<std::vector<std::string>> new_cols;
            for (const auto& cat : cats) {
                new_names.push_back(step.column + "=" + cat);
                std::vector<std::string> col;
                col.reserve(raw_cols[c].size());
                for (const auto& v : raw_cols[c]) col.push_back(v == cat ? "1" : "0");
                new_cols.push_back(std::move(col));
            }
            names.erase(names.begin() + c);
            raw_cols.erase(raw_cols.begin() + c);
            names.insert(names.begin() + c, new_names.begin(), new_names.end());
            raw_cols.insert(raw_cols.begin() + c, std::make_move_iterator(new_cols.begin()),
                            std::make_move_iterator(new_cols.end()));
        } else if (step.kind == RecipeStep::Kind::bin) {
            const int c = find_name(step.column);
            if (step.n_bins < 2) throw InvalidSpec("bin step needs at least 2 bins");
            const double width = (step.hi - step.lo) / step.n_bins;
            if (!(width > 0)) throw InvalidSpec("bin step needs hi > lo");
            std::vector<std::string> col;
            col.reserve(raw_cols[c].size());
            for (const auto& cell : raw_cols[c]) {
                const double v = parse_number(cell, step.column);
                int id = static_cast<int>(std::floor((v - step.lo) / width));
                id = std::clamp(id, 0, step.n_bins - 1);
                col.push_back(std::to_string(id));
            }
            names.push_back(step.column + "_bin");
            raw_cols.push_back(std::move(col));
        }
    }

    if (!recipe.constraint_column.empty()) {
        const int cc = find_name(recipe.constraint_column);
        out.data.constraint_ids = raw_cols[cc];
        // numeric id columns (RAD, model year, bins) stay as features;
        // opaque tokens are ids only
        bool numeric_ok = true;
        for (const auto& cell : raw_cols[cc]) {
            try {
                (void)parse_number(cell, recipe.constraint_column);
            } catch (const ParseError&) {
                numeric_ok = false;
                break;
            }
        }
        if (!numeric_ok) {
            names.erase(names.begin() + cc);
            raw_cols.erase(raw_cols.begin() + cc);
        }
    }

    int target_idx = -1;
    try {
        target_idx = find_name(recipe.target_column);
    } catch (const MissingColumn&) {
        if (require_target) throw;
        out.has_target = false;
    }
    const int n = static_cast<int>(table.rows.size());
    Vecd y = Vecd::Zero(n);
    if (target_idx >= 0) {
        for (int j = 0; j < n; ++j) {
            try {
                y[j] = parse_number(raw_cols[target_idx][j], recipe.target_column);
            } catch (const ParseError&) {
                throw NonNumericTarget("target column '" + recipe.target_column +
                                       "' has non-numeric value '" + raw_cols[target_idx][j] +
                                       "'");
            }
        }
        names.erase(names.begin() + target_idx);
        raw_cols.erase(raw_cols.begin() + target_idx);
    }

    const int d = static_cast<int>(names.size());
    if (d == 0) throw InsufficientData(path + ": no feature columns left");
    Matd X(n, d);
    for (int c = 0; c < d; ++c)
        for (int j = 0; j < n; ++j) X(j, c) = parse_number(raw_cols[c][j], names[c]);

    out.data.X = std::move(X);
    out.data.y = std::move(y);
    out.feature_names = std::move(names);
    for (const auto& step : recipe.steps)
        if (step.kind == RecipeStep::Kind::scale) out.wants_scaling = true;
    out.data.validate();
    return out;
}

Dataset load_csv(const std::string& path, const PreprocessRecipe& recipe) {
    LoadedData loaded = load_table(path, recipe);
    if (loaded.wants_scaling) loaded.data.X = fit_scaler(loaded.data.X).apply(loaded.data.X);
    return std::move(loaded.data);
}

namespace {

const char* step_kind_name(RecipeStep::Kind k) {
    switch (k) {
        case RecipeStep::Kind::drop: return "drop";
        case RecipeStep::Kind::one_hot: return "one_hot";
        case RecipeStep::Kind::bin: return "bin";
        case RecipeStep::Kind::scale: return "scale";
    }
    return "scale";
}

RecipeStep::Kind step_kind_from_name(const std::string& s) {
    if (s == "drop") return RecipeStep::Kind::drop;
    if (s == "one_hot") return RecipeStep::Kind::one_hot;
    if (s == "bin") return RecipeStep::Kind::bin;
    if (s == "scale") return RecipeStep::Kind::scale;
    throw ParseError("unknown recipe step kind: " + s);
}

}  // namespace

json recipe_to_json(const PreprocessRecipe& recipe) {
    json steps = json::array();
    for (const auto& s : recipe.steps) {
        json step = {{"kind", step_kind_name(s.kind)}, {"column", s.column}};
        if (s.kind == RecipeStep::Kind::bin) {
            step["lo"] = s.lo;
            step["hi"] = s.hi;
            step["n_bins"] = s.n_bins;
        }
        steps.push_back(std::move(step));
    }
    return {{"name", recipe.name},
            {"steps", std::move(steps)},
            {"target_column", recipe.target_column},
            {"constraint_column", recipe.constraint_column}};
}

PreprocessRecipe recipe_from_json(const json& j) {
    PreprocessRecipe r;
    r.name = j.at("name").get<std::string>();
    r.target_column = j.at("target_column").get<std::string>();
    r.constraint_column = j.value("constraint_column", "");
    for (const auto& sj : j.at("steps")) {
        RecipeStep s;
        s.kind = step_kind_from_name(sj.at("kind").get<std::string>());
        s.column = sj.value("column", "");
        if (s.kind == RecipeStep::Kind::bin) {
            s.lo = sj.at("lo").get<double>();
            s.hi = sj.at("hi").get<double>();
            s.n_bins = sj.at("n_bins").get<int>();
        }
        r.steps.push_back(std::move(s));
    }
    return r;
}

json scaler_to_json(const Scaler& s) {
    json lo = json::array(), hi = json::array();
    for (int i = 0; i < s.lo.size(); ++i) {
        lo.push_back(s.lo[i]);
        hi.push_back(s.hi[i]);
    }
    return {{"lo", std::move(lo)}, {"hi", std::move(hi)}};
}

Scaler scaler_from_json(const json& j) {
    Scaler s;
    const auto& lo = j.at("lo");
    const auto& hi = j.at("hi");
    if (lo.size() != hi.size()) throw ParseError("scaler lo/hi length mismatch");
    s.lo = Vecd(static_cast<int>(lo.size()));
    s.hi = Vecd(static_cast<int>(hi.size()));
    for (int i = 0; i < s.lo.size(); ++i) {
        s.lo[i] = lo.at(i).get<double>();
        s.hi[i] = hi.at(i).get<double>();
    }
    return s;
}

SyntheticSpec::Scenario scenario_from_string(const std::string& s) {
    if (s == "planted_lines") return SyntheticSpec::Scenario::planted_lines;
    if (s == "indistinguishable_pair") return SyntheticSpec::Scenario::indistinguishable_pair;
    if (s == "grouped_mixture") return SyntheticSpec::Scenario::grouped_mixture;
    throw InvalidSpec("unknown synthetic scenario: " + s);
}

std::string to_string(SyntheticSpec::Scenario s) {
    switch (s) {
        case SyntheticSpec::Scenario::planted_lines: return "planted_lines";
        case SyntheticSpec::Scenario::indistinguishable_pair: return "indistinguishable_pair";
        case SyntheticSpec::Scenario::grouped_mixture: return "grouped_mixture";
    }
    return "planted_lines";
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    if (spec.n < 2 || spec.d < 1 || spec.k < 1) throw InvalidSpec("degenerate synthetic spec");
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> ux(-1.0, 1.0);
    std::uniform_real_distribution<double> uw(-2.0, 2.0);
    std::normal_distribution<double> noise(0.0, 1.0);

    SyntheticData out;
    const int n = spec.n, d = spec.d;

    auto draw_models = [&](int k) {
        std::vector<LinearModel> models(k);
        for (auto& m : models) {
            m.w = Vecd(d);
            for (int c = 0; c < d; ++c) m.w[c] = uw(rng);
            m.b = ux(rng);
        }
        return models;
    };

    switch (spec.scenario) {
        case SyntheticSpec::Scenario::planted_lines: {
            out.models = draw_models(spec.k);
            out.data.X = Matd(n, d);
            out.data.y = Vecd(n);
            out.truth.k = spec.k;
            out.truth.labels = VecXi(n);
            for (int j = 0; j < n; ++j) {
                for (int c = 0; c < d; ++c) out.data.X(j, c) = ux(rng);
                const int lbl = j % spec.k;
                out.truth.labels[j] = lbl;
                out.data.y[j] = out.data.X.row(j) * out.models[lbl].w + out.models[lbl].b +
                                spec.noise_sd * noise(rng);
            }
            break;
        }
        case SyntheticSpec::Scenario::indistinguishable_pair: {
            // mirrored lines through shared inputs: x duplicated, y = +-w.x
            out.models.resize(2);
            out.models[0].w = Vecd::Ones(d);
            out.models[0].b = 0.0;
            out.models[1].w = -Vecd::Ones(d);
            out.models[1].b = 0.0;
            const int pairs = n / 2;
            const int total = pairs * 2;
            out.data.X = Matd(total, d);
            out.data.y = Vecd(total);
            out.truth.k = 2;
            out.truth.labels = VecXi(total);
            for (int p = 0; p < pairs; ++p) {
                Vecd x(d);
                for (int c = 0; c < d; ++c) x[c] = ux(rng);
                for (int side = 0; side < 2; ++side) {
                    const int j = 2 * p + side;
                    out.data.X.row(j) = x.transpose();
                    out.truth.labels[j] = side;
                    out.data.y[j] = x.dot(out.models[side].w) + spec.noise_sd * noise(rng);
                }
            }
            break;
        }
        case SyntheticSpec::Scenario::grouped_mixture: {
            if (spec.groups_per_cluster < 1) throw InvalidSpec("groups_per_cluster must be >= 1");
            out.models = draw_models(spec.k);
            const int m = spec.k * spec.groups_per_cluster;
            out.data.X = Matd(n, d);
            out.data.y = Vecd(n);
            out.data.constraint_ids.resize(n);
            out.truth.k = spec.k;
            out.truth.labels = VecXi(n);
            for (int j = 0; j < n; ++j) {
                const int g = j % m;
                const int lbl = g % spec.k;
                for (int c = 0; c < d; ++c) out.data.X(j, c) = ux(rng);
                out.truth.labels[j] = lbl;
                out.data.constraint_ids[j] = "g" + std::to_string(g);
                out.data.y[j] = out.data.X.row(j) * out.models[lbl].w + out.models[lbl].b +
                                spec.noise_sd * noise(rng);
            }
            break;
        }
    }
    out.data.validate();
    return out;
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
    std::ofstream outf(path);
    if (!outf) throw IoError("cannot write " + path);
    outf.precision(17);
    const int d = data.d();
    for (int c = 0; c < d; ++c) outf << "x" << c << ",";
    outf << "target";
    if (data.has_constraints()) outf << ",group";
    outf << "\n";
    for (int j = 0; j < data.n(); ++j) {
        for (int c = 0; c < d; ++c) outf << data.X(j, c) << ",";
        outf << data.y[j];
        if (data.has_constraints()) outf << "," << data.constraint_ids[j];
        outf << "\n";
    }
    if (!outf) throw IoError("failed writing " + path);
}

}  // namespace clr
