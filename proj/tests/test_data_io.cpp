#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "clr/data_io.hpp"
#include "clr/hard_clr.hpp"
#include "clr/linear.hpp"

using namespace clr;

namespace {

std::string data_path(const std::string& name) {
    return std::string(CLR_DATA_DIR) + "/" + name;
}

std::string write_temp(const std::string& name, const std::string& content) {
    const std::string path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("csv reader handles quoting, crlf and blank lines") {
    const std::string path = write_temp(
        "clr_io_quotes.csv",
        "name,notes,target\r\n"
        "a,\"hello, world\",1\r\n"
        "\r\n"
        "b,\"say \"\"hi\"\"\",2\n");
    const RawTable t = read_csv_table(path);
    REQUIRE(t.header.size() == 3);
    CHECK(t.header[1] == "notes");
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][1] == "hello, world");
    CHECK(t.rows[1][1] == "say \"hi\"");
    CHECK(t.col("target") == 2);
    CHECK_THROWS_AS(t.col("missing"), MissingColumn);
}

TEST_CASE("csv reader rejects broken inputs") {
    CHECK_THROWS_AS(read_csv_table("/nonexistent/nowhere.csv"), IoError);
    CHECK_THROWS_AS(read_csv_table(write_temp("clr_io_empty.csv", "")), ParseError);
    CHECK_THROWS_AS(
        read_csv_table(write_temp("clr_io_ragged.csv", "a,b\n1,2\n3\n")),
        ParseError);
}

TEST_CASE("one-hot expansion on a three-row table") {
    const std::string path = write_temp(
        "clr_io_onehot.csv",
        "color,val,target\n"
        "red,1,10\n"
        "blue,2,20\n"
        "red,3,30\n");
    PreprocessRecipe r;
    r.steps = {{RecipeStep::Kind::one_hot, "color", 0, 1, 0}};
    r.target_column = "target";
    const LoadedData loaded = load_table(path, r);
    REQUIRE(loaded.feature_names.size() == 3);
    CHECK(loaded.feature_names[0] == "color=blue");  // categories come out sorted
    CHECK(loaded.feature_names[1] == "color=red");
    CHECK(loaded.feature_names[2] == "val");
    Matd want(3, 3);
    want << 0, 1, 1,
            1, 0, 2,
            0, 1, 3;
    CHECK((loaded.data.X - want).cwiseAbs().maxCoeff() == 0.0);
    CHECK(loaded.data.y[0] == 10.0);
    CHECK(loaded.data.y[2] == 30.0);
    CHECK(loaded.wants_scaling == false);
}

TEST_CASE("rows with missing cells are dropped and counted") {
    const std::string path = write_temp(
        "clr_io_missing.csv",
        "a,target\n"
        "1,1\n"
        "?,2\n"
        "3,3\n"
        "NA,4\n"
        ",5\n"
        "6,6\n");
    PreprocessRecipe r;
    r.target_column = "target";
    const LoadedData loaded = load_table(path, r);
    CHECK(loaded.n_dropped == 3);
    REQUIRE(loaded.data.n() == 3);
    CHECK(loaded.data.X(0, 0) == 1.0);
    CHECK(loaded.data.X(1, 0) == 3.0);
    CHECK(loaded.data.X(2, 0) == 6.0);
}

TEST_CASE("binning clamps out-of-range values") {
    const std::string path = write_temp(
        "clr_io_bins.csv",
        "v,target\n"
        "0.05,0\n"
        "0.105,0\n"
        "0.115,0\n"
        "0.155,0\n"
        "0.195,0\n"
        "0.25,0\n");
    PreprocessRecipe r;
    r.steps = {{RecipeStep::Kind::bin, "v", 0.1, 0.2, 10}};
    r.target_column = "target";
    r.constraint_column = "v_bin";
    const LoadedData loaded = load_table(path, r);
    const std::vector<std::string> want = {"0", "0", "1", "5", "9", "9"};
    CHECK(loaded.data.constraint_ids == want);
    // the numeric bin ids double as a feature column
    CHECK(loaded.feature_names.back() == "v_bin");
}

TEST_CASE("min-max scaling maps the observed range onto [-1, 1]") {
    const std::string path = write_temp(
        "clr_io_scale.csv",
        "a,b,target\n"
        "0,7,1\n"
        "5,7,2\n"
        "10,7,3\n");
    const Dataset ds = load_csv(path, builtin_recipe("generic"));
    CHECK(ds.X(0, 0) == -1.0);
    CHECK(ds.X(1, 0) == 0.0);
    CHECK(ds.X(2, 0) == 1.0);
    // constant columns collapse to zero
    CHECK(ds.X.col(1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scaler endpoints and errors") {
    Matd X(3, 2);
    X << 0, 4,
         5, 4,
         10, 4;
    const Scaler s = fit_scaler(X);
    CHECK(s.lo[0] == 0.0);
    CHECK(s.hi[0] == 10.0);
    CHECK(s.lo[1] == 4.0);
    CHECK(s.hi[1] == 4.0);
    const Matd Z = s.apply(X);
    CHECK(Z(0, 0) == -1.0);
    CHECK(Z(2, 0) == 1.0);
    CHECK(Z.col(1).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(s.apply(Matd::Zero(2, 3)), DimensionMismatch);
    CHECK_THROWS_AS(fit_scaler(Matd(0, 2)), InsufficientData);

    // applying train-fitted bounds to new data extrapolates linearly
    Matd fresh(1, 2);
    fresh << 15, 9;
    const Matd Zf = s.apply(fresh);
    CHECK(Zf(0, 0) == 2.0);
    CHECK(Zf(0, 1) == 0.0);
}

TEST_CASE("builtin recipes load the benchmark files") {
    SUBCASE("boston") {
        const LoadedData loaded = load_table(data_path("boston.csv"), builtin_recipe("boston"));
        CHECK(loaded.data.n() == 506);
        CHECK(loaded.data.d() == 13);
        CHECK(loaded.n_dropped == 0);
        CHECK(loaded.wants_scaling);
        CHECK(loaded.data.has_constraints());
        // rad stays available both as a feature and as the constraint id
        bool has_rad = false;
        for (const auto& n : loaded.feature_names) has_rad |= (n == "rad");
        CHECK(has_rad);
        // unscaled: tax is in the hundreds
        CHECK(loaded.data.X.maxCoeff() > 100.0);
        const Dataset scaled = load_csv(data_path("boston.csv"), builtin_recipe("boston"));
        CHECK(scaled.X.maxCoeff() == 1.0);
        CHECK(scaled.X.minCoeff() == -1.0);
        CHECK(scaled.y.mean() == doctest::Approx(22.53).epsilon(0.01));
    }

    SUBCASE("abalone") {
        const LoadedData loaded = load_table(data_path("abalone.csv"), builtin_recipe("abalone"));
        CHECK(loaded.data.n() == 4177);
        CHECK(loaded.data.d() == 11);
        CHECK(loaded.n_dropped == 0);
        const auto& names = loaded.feature_names;
        CHECK(std::count(names.begin(), names.end(), "sex=F") == 1);
        CHECK(std::count(names.begin(), names.end(), "sex=I") == 1);
        CHECK(std::count(names.begin(), names.end(), "sex=M") == 1);
        CHECK(names.back() == "diameter_bin");

        // every bin id replays the clamp(floor((v - lo) / width)) rule
        const RawTable raw = read_csv_table(data_path("abalone.csv"));
        const int dc = raw.col("diameter");
        const double width = (0.2 - 0.1) / 10;
        REQUIRE(raw.rows.size() == loaded.data.constraint_ids.size());
        int mismatches = 0;
        for (std::size_t j = 0; j < raw.rows.size(); ++j) {
            const double v = std::stod(raw.rows[j][dc]);
            const int id = std::clamp(static_cast<int>(std::floor((v - 0.1) / width)), 0, 9);
            mismatches += (loaded.data.constraint_ids[j] != std::to_string(id));
        }
        CHECK(mismatches == 0);
    }

    SUBCASE("auto_mpg") {
        const LoadedData loaded = load_table(data_path("auto_mpg.csv"), builtin_recipe("auto_mpg"));
        CHECK(loaded.data.n() == 392);
        CHECK(loaded.data.d() == 9);
        CHECK(loaded.n_dropped == 6);  // the horsepower '?' rows
        const auto& names = loaded.feature_names;
        CHECK(std::count(names.begin(), names.end(), "car_name") == 0);
        CHECK(std::count(names.begin(), names.end(), "origin=europe") == 1);
        CHECK(std::count(names.begin(), names.end(), "origin=japan") == 1);
        CHECK(std::count(names.begin(), names.end(), "origin=usa") == 1);
    }

    SUBCASE("unknown recipe name") {
        CHECK_THROWS_AS(builtin_recipe("wine"), UnknownRecipe);
    }
}

TEST_CASE("target handling") {
    const std::string path = write_temp(
        "clr_io_target.csv",
        "a,b\n"
        "1,2\n"
        "3,4\n");
    PreprocessRecipe r;
    r.target_column = "y";
    CHECK_THROWS_AS(load_table(path, r), MissingColumn);
    const LoadedData loaded = load_table(path, r, /*require_target=*/false);
    CHECK(loaded.has_target == false);
    CHECK(loaded.data.d() == 2);
    CHECK(loaded.data.y.cwiseAbs().maxCoeff() == 0.0);

    const std::string bad = write_temp(
        "clr_io_badtarget.csv",
        "a,target\n"
        "1,high\n");
    PreprocessRecipe r2;
    r2.target_column = "target";
    CHECK_THROWS_AS(load_table(bad, r2), NonNumericTarget);

    const std::string only = write_temp(
        "clr_io_onlytarget.csv",
        "target\n"
        "1\n");
    CHECK_THROWS_AS(load_table(only, r2), InsufficientData);
}

TEST_CASE("recipe and scaler json round trips") {
    const PreprocessRecipe r = builtin_recipe("abalone");
    const PreprocessRecipe back = recipe_from_json(nlohmann::json::parse(recipe_to_json(r).dump()));
    CHECK(back.name == r.name);
    CHECK(back.target_column == r.target_column);
    CHECK(back.constraint_column == r.constraint_column);
    REQUIRE(back.steps.size() == r.steps.size());
    for (std::size_t i = 0; i < r.steps.size(); ++i) {
        CHECK(back.steps[i].kind == r.steps[i].kind);
        CHECK(back.steps[i].column == r.steps[i].column);
    }
    CHECK(back.steps[1].lo == 0.1);
    CHECK(back.steps[1].hi == 0.2);
    CHECK(back.steps[1].n_bins == 10);

    Matd X(2, 2);
    X << 0, -3,
         8, 5;
    const Scaler s = fit_scaler(X);
    const Scaler sback = scaler_from_json(nlohmann::json::parse(scaler_to_json(s).dump()));
    CHECK((sback.lo - s.lo).cwiseAbs().maxCoeff() == 0.0);
    CHECK((sback.hi - s.hi).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(scaler_from_json(nlohmann::json{{"lo", {0.0}}, {"hi", {0.0, 1.0}}}),
                    ParseError);
}

TEST_CASE("planted lines carry their models exactly") {
    SyntheticSpec spec;
    spec.scenario = SyntheticSpec::Scenario::planted_lines;
    spec.n = 90;
    spec.d = 3;
    spec.k = 3;
    spec.noise_sd = 0.0;
    spec.seed = 5;
    const SyntheticData s = generate_synthetic(spec);
    REQUIRE(s.data.n() == 90);
    REQUIRE(static_cast<int>(s.models.size()) == 3);
    for (int j = 0; j < 90; ++j) {
        const int lbl = s.truth.labels[j];
        CHECK(lbl == j % 3);
        const double want = s.data.X.row(j) * s.models[lbl].w + s.models[lbl].b;
        CHECK(std::abs(s.data.y[j] - want) < 1e-12);
    }
    CHECK(s.data.X.maxCoeff() <= 1.0);
    CHECK(s.data.X.minCoeff() >= -1.0);
}

TEST_CASE("the indistinguishable pair defeats a single linear model") {
    SyntheticSpec spec;
    spec.scenario = SyntheticSpec::Scenario::indistinguishable_pair;
    spec.n = 200;
    spec.d = 3;
    spec.noise_sd = 0.0;
    spec.seed = 9;
    const SyntheticData s = generate_synthetic(spec);
    REQUIRE(s.data.n() == 200);
    for (int p = 0; p < 100; ++p) {
        CHECK((s.data.X.row(2 * p) - s.data.X.row(2 * p + 1)).cwiseAbs().maxCoeff() == 0.0);
        CHECK(s.data.y[2 * p] == -s.data.y[2 * p + 1]);
    }
    const LinearModel m = fit_linear(s.data.X, s.data.y);
    CHECK(m.w.cwiseAbs().maxCoeff() < 1e-8);
    CHECK(std::abs(m.b) < 1e-12);
    const Vecd pred = predict_affine(s.data.X, m.w, m.b);
    CHECK(std::abs(r2(s.data.y, pred)) < 1e-8);
}

TEST_CASE("grouped mixture tokens are consistent and learnable under constraints") {
    SyntheticSpec spec;
    spec.scenario = SyntheticSpec::Scenario::grouped_mixture;
    spec.n = 160;
    spec.d = 2;
    spec.k = 2;
    spec.groups_per_cluster = 4;
    spec.noise_sd = 0.0;
    spec.seed = 13;
    const SyntheticData s = generate_synthetic(spec);
    REQUIRE(s.data.has_constraints());
    for (int j = 0; j < s.data.n(); ++j) {
        const int g = j % 8;
        CHECK(s.data.constraint_ids[j] == "g" + std::to_string(g));
        CHECK(s.truth.labels[j] == g % 2);
    }

    const ConstraintSet cs = ConstraintSet::from_tokens(s.data.constraint_ids);
    REQUIRE(static_cast<int>(cs.groups.size()) == 8);
    HardClrConfig cfg;
    cfg.k = 2;
    cfg.gamma = 0.0;
    cfg.max_iter = 50;
    double best_obj = std::numeric_limits<double>::infinity();
    ClusterwiseModel best;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        cfg.seed = seed;
        const ClusterwiseModel fit = fit_hard_clr(s.data, cfg, &cs);
        if (fit.objective_trace_raw.back() < best_obj) {
            best_obj = fit.objective_trace_raw.back();
            best = fit;
        }
    }
    Vecd pred(s.data.n());
    for (int j = 0; j < s.data.n(); ++j) {
        const auto& m = best.models[static_cast<size_t>(best.train_partition.labels[j])];
        pred[j] = s.data.X.row(j) * m.w + m.b;
    }
    CHECK(r2(s.data.y, pred) > 0.99);
}

TEST_CASE("synthetic generation is reproducible") {
    SyntheticSpec spec;
    spec.scenario = SyntheticSpec::Scenario::planted_lines;
    spec.n = 50;
    spec.seed = 77;
    const SyntheticData a = generate_synthetic(spec);
    const SyntheticData b = generate_synthetic(spec);
    CHECK((a.data.X - b.data.X).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.data.y - b.data.y).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.truth.labels - b.truth.labels).cwiseAbs().maxCoeff() == 0);
    spec.seed = 78;
    const SyntheticData c = generate_synthetic(spec);
    CHECK((a.data.y - c.data.y).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("synthetic spec validation and scenario names") {
    SyntheticSpec spec;
    spec.n = 1;
    CHECK_THROWS_AS(generate_synthetic(spec), InvalidSpec);
    spec.n = 10;
    spec.k = 0;
    CHECK_THROWS_AS(generate_synthetic(spec), InvalidSpec);
    spec.k = 2;
    spec.scenario = SyntheticSpec::Scenario::grouped_mixture;
    spec.groups_per_cluster = 0;
    CHECK_THROWS_AS(generate_synthetic(spec), InvalidSpec);

    for (const char* name : {"planted_lines", "indistinguishable_pair", "grouped_mixture"}) {
        CHECK(to_string(scenario_from_string(name)) == name);
    }
    CHECK_THROWS_AS(scenario_from_string("spirals"), InvalidSpec);
}

TEST_CASE("datasets round trip through csv") {
    SyntheticSpec spec;
    spec.scenario = SyntheticSpec::Scenario::grouped_mixture;
    spec.n = 40;
    spec.d = 2;
    spec.k = 2;
    spec.groups_per_cluster = 2;
    spec.noise_sd = 0.25;
    spec.seed = 3;
    const SyntheticData s = generate_synthetic(spec);

    const std::string path =
        (std::filesystem::temp_directory_path() / "clr_io_roundtrip.csv").string();
    write_dataset_csv(s.data, path);

    PreprocessRecipe r;
    r.target_column = "target";
    r.constraint_column = "group";
    const LoadedData back = load_table(path, r);
    REQUIRE(back.data.n() == 40);
    CHECK(back.data.d() == 2);  // the group token column is ids only, not a feature
    CHECK((back.data.X - s.data.X).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.data.y - s.data.y).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.data.constraint_ids == s.data.constraint_ids);

    CHECK_THROWS_AS(write_dataset_csv(s.data, "/nonexistent/nowhere.csv"), IoError);
}
