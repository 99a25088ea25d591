#include "doctest.h"

#include <cmath>
#include <set>

#include "choicenet/dataset.hpp"
#include "testutil.hpp"

using namespace choicenet;
using namespace choicenet::data;

TEST_SUITE_BEGIN("dataset");

namespace {

const char* kTable1Csv =
    "Respondent ID,Choice,TT1,TC1,TT2,TC2\n"
    "1,2,50,15,45,18\n"
    "2,1,65,10,70,8\n"
    "3,1,50,10,58,8\n";

} // namespace

TEST_CASE("load_wide_csv parses the wide layout") {
    testutil::TempDir tmp("load");
    testutil::write_file(tmp.file("t1.csv"), kTable1Csv);
    ChoiceDataset ds = load_wide_csv(tmp.file("t1.csv"), testutil::two_alt_schema());

    CHECK(ds.n_rows() == 3);
    CHECK(ds.choice[0] == 1); // stored 0-based; file value 2
    CHECK(ds.value("TT1", 0) == 50);
    CHECK(ds.value("TC1", 0) == 15);
    CHECK(ds.value("TT2", 0) == 45);
    CHECK(ds.value("TC2", 0) == 18);
    CHECK(ds.respondent[2] == 3);
}

TEST_CASE("load_wide_csv: empty data section gives a valid N=0 dataset") {
    testutil::TempDir tmp("empty");
    testutil::write_file(tmp.file("e.csv"), "Respondent ID,Choice,TT1,TC1,TT2,TC2\n");
    ChoiceDataset ds = load_wide_csv(tmp.file("e.csv"), testutil::two_alt_schema());
    CHECK(ds.n_rows() == 0);
    CHECK_THROWS_AS(minmax_normalize(ds), ValidationError); // rejected downstream
}

TEST_CASE("load_wide_csv error paths") {
    testutil::TempDir tmp("err");
    SUBCASE("missing column names the column") {
        testutil::write_file(tmp.file("m.csv"), "Respondent ID,Choice,TT1,TC1,TT2\n1,1,1,1,1\n");
        CHECK_THROWS_WITH_AS(load_wide_csv(tmp.file("m.csv"), testutil::two_alt_schema()),
                             doctest::Contains("TC2"), ValidationError);
    }
    SUBCASE("non-numeric cell reports the row") {
        testutil::write_file(tmp.file("n.csv"),
                             "Respondent ID,Choice,TT1,TC1,TT2,TC2\n1,1,1,1,1,1\n2,1,abc,1,1,1\n");
        CHECK_THROWS_WITH_AS(load_wide_csv(tmp.file("n.csv"), testutil::two_alt_schema()),
                             doctest::Contains("row 2"), ValidationError);
    }
    SUBCASE("choice outside 1..J") {
        testutil::write_file(tmp.file("c.csv"), "Respondent ID,Choice,TT1,TC1,TT2,TC2\n1,5,1,1,1,1\n");
        CHECK_THROWS_AS(load_wide_csv(tmp.file("c.csv"), testutil::two_alt_schema()), ValidationError);
    }
}

TEST_CASE("prescale divides attributes and records the factor") {
    testutil::TempDir tmp("pre");
    testutil::write_file(tmp.file("t.csv"),
                         "Respondent ID,Choice,TT1,TC1,TT2,TC2\n7,2,50,576,45,18\n");
    ChoiceDataset ds = load_wide_csv(tmp.file("t.csv"), testutil::two_alt_schema());

    ChoiceDataset scaled = prescale(ds, 100.0);
    CHECK(scaled.value("TC1", 0) == doctest::Approx(5.76));
    CHECK(scaled.choice[0] == 1);
    CHECK(scaled.respondent[0] == 7);
    CHECK(scaled.prescale_applied == 100.0);

    ChoiceDataset same = prescale(ds, 1.0);
    CHECK(same.value("TC1", 0) == 576);

    CHECK_THROWS_AS(prescale(ds, -1.0), ValidationError);
    CHECK_THROWS_AS(prescale(ds, 0.0), ValidationError);
}

TEST_CASE("minmax_normalize: own bounds for non-cost, pooled bounds for cost") {
    AttributeSchema schema;
    schema.alternatives = {{"a", "TC1", {"TT1"}}, {"b", "TC2", {"TT2"}}, {"c", "TC3", {"TT3"}}};
    schema.choice_column = "CH";

    ChoiceDataset ds;
    ds.schema = schema;
    ds.columns = schema.feature_columns();
    // TT columns 0/5/10 so the midpoint maps to 0.5; costs pool to (0, 768)
    ds.values = {
        {0, 5, 10},    // TT1
        {0, 300, 576}, // TC1
        {0, 5, 10},    // TT2
        {0, 400, 768}, // TC2
        {0, 5, 10},    // TT3
        {8, 384, 520}, // TC3
    };
    ds.choice = {0, 1, 2};

    auto [norm, rec] = minmax_normalize(ds);
    CHECK(norm.value("TT1", 1) == doctest::Approx(0.5));
    CHECK(rec.pooled_cost.min == 0);
    CHECK(rec.pooled_cost.max == 768);
    // TC3 value 384 = 768 * 0.5 maps to 0.5 under the pooled bounds
    CHECK(norm.value("TC3", 1) == doctest::Approx(0.5));
    // every cost column shares one affine map
    for (const auto& c : {"TC1", "TC2", "TC3"}) {
        CHECK(rec.range_of(c).min == 0);
        CHECK(rec.range_of(c).max == 768);
    }
    for (const auto& col : norm.values)
        for (double v : col) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
}

TEST_CASE("minmax_normalize rejects degenerate columns by name") {
    ChoiceDataset ds;
    ds.schema = testutil::two_alt_schema();
    ds.columns = ds.schema.feature_columns();
    ds.values = {{1, 1}, {0, 5}, {2, 3}, {1, 4}};
    ds.choice = {0, 1};
    CHECK_THROWS_WITH_AS(minmax_normalize(ds), doctest::Contains("TT1"), ValidationError);
}

TEST_CASE("normalization round-trip and interval invariants") {
    Rng rng(42);
    ChoiceDataset ds = testutil::random_dataset(testutil::two_alt_schema(), 200, rng, 3.0, 97.0);
    auto [norm, rec] = minmax_normalize(ds);
    for (std::size_t c = 0; c < ds.columns.size(); ++c)
        for (std::size_t r = 0; r < ds.n_rows(); ++r) {
            const double z = norm.values[c][r];
            CHECK(z >= 0.0);
            CHECK(z <= 1.0);
            CHECK(rec.denormalize(ds.columns[c], z) ==
                  doctest::Approx(ds.values[c][r]).epsilon(1e-12));
        }
}

TEST_CASE("stratified_split preserves class shares and is deterministic") {
    // shares modeled on a three-mode survey: 8.6 / 57.3 / 34.1 percent
    AttributeSchema schema = testutil::three_alt_schema();
    Rng rng(7);
    ChoiceDataset ds = testutil::random_dataset(schema, 9036, rng);
    const double shares[] = {0.086, 0.573, 0.341};
    for (std::size_t r = 0; r < ds.n_rows(); ++r) {
        const double u = uniform_open(rng);
        ds.choice[r] = u < shares[0] ? 0 : (u < shares[0] + shares[1] ? 1 : 2);
    }

    auto [train, test] = data::stratified_split(ds, 0.2, 99);
    CHECK(train.n_rows() + test.n_rows() == ds.n_rows());
    CHECK(test.n_rows() == doctest::Approx(0.2 * ds.n_rows()).epsilon(0.001));

    auto share = [](const ChoiceDataset& d, int c) {
        std::size_t k = 0;
        for (int y : d.choice) k += (y == c);
        return static_cast<double>(k) / d.n_rows();
    };
    for (int c = 0; c < 3; ++c)
        CHECK(std::abs(share(test, c) - share(ds, c)) <= 1.0 / test.n_rows());

    auto [train2, test2] = data::stratified_split(ds, 0.2, 99);
    CHECK(train2.values == train.values);
    CHECK(test2.choice == test.choice);

    auto [train3, test3] = data::stratified_split(ds, 0.2, 100);
    CHECK(train3.values != train.values); // different seed reshuffles
}

TEST_CASE("stratified_split exact arithmetic on one class") {
    AttributeSchema schema = testutil::two_alt_schema();
    Rng rng(3);
    ChoiceDataset ds = testutil::random_dataset(schema, 10, rng);
    for (auto& c : ds.choice) c = 0;
    auto [train, test] = data::stratified_split(ds, 0.2, 5);
    CHECK(test.n_rows() == 2);
    CHECK(train.n_rows() == 8);
}

TEST_CASE("stratified_split argument validation") {
    Rng rng(3);
    ChoiceDataset ds = testutil::random_dataset(testutil::two_alt_schema(), 10, rng);
    CHECK_THROWS_AS(data::stratified_split(ds, 0.0, 1), ValidationError);
    CHECK_THROWS_AS(data::stratified_split(ds, 1.0, 1), ValidationError);
}

TEST_CASE("validation_tail is positional, order-preserving and pure") {
    AttributeSchema schema = testutil::two_alt_schema();
    ChoiceDataset ds;
    ds.schema = schema;
    ds.columns = schema.feature_columns();
    ds.values.assign(4, std::vector<double>(100));
    ds.choice.assign(100, 0);
    for (int r = 0; r < 100; ++r) ds.values[0][r] = r + 1; // row tag 1..100

    auto [fit, val] = validation_tail(ds, 0.2);
    CHECK(fit.n_rows() == 80);
    CHECK(val.n_rows() == 20);
    CHECK(fit.values[0].front() == 1);
    CHECK(fit.values[0].back() == 80);
    CHECK(val.values[0].front() == 81);
    CHECK(val.values[0].back() == 100);

    auto [fit2, val2] = validation_tail(ds, 0.2);
    CHECK(fit2.values == fit.values);
    CHECK(val2.values == val.values);

    auto [h1, h2] = validation_tail(ds, 0.5);
    CHECK(h1.n_rows() == 50);
    CHECK(h2.n_rows() == 50);
    CHECK_THROWS_AS(validation_tail(ds, 0.0), ValidationError);
    CHECK_THROWS_AS(validation_tail(ds, 1.0), ValidationError);
}

TEST_CASE("gradient_to_original_units applies the chain rule") {
    ScalingRecord rec;
    rec.prescale = 1.0;
    rec.per_column["A"] = {0, 10};
    rec.per_column["B"] = {0, 1};

    CHECK(gradient_to_original_units(2.0, "A", rec, UnitMode::per_unit) == doctest::Approx(0.2));
    CHECK(gradient_to_original_units(2.0, "B", rec, UnitMode::per_unit) == doctest::Approx(2.0));
    CHECK_THROWS_AS(gradient_to_original_units(1.0, "missing", rec, UnitMode::per_unit), ValidationError);
}

TEST_CASE("chain rule against finite differences through the full scaling pipeline") {
    // f(x_original) = phi(normalize(prescale(x))); compare d f/d x_original
    // against the converted normalized-space gradient, in both unit modes.
    ScalingRecord rec;
    rec.prescale = 100.0;
    rec.per_column["A"] = {0.3, 7.4}; // bounds on prescaled data

    auto phi = [](double z) { return std::sin(3 * z) + 0.5 * z * z; };
    auto f_original = [&](double x) { return phi(rec.normalize("A", x / rec.prescale)); };

    const double x0 = 412.0;
    const double z0 = rec.normalize("A", x0 / rec.prescale);
    const double dphi = 3 * std::cos(3 * z0) + z0; // analytic normalized-space gradient

    const double fd = testutil::central_fd(f_original, x0, 1e-3);
    const double per_unit = gradient_to_original_units(dphi, "A", rec, UnitMode::per_unit);
    CHECK(testutil::rel_err(fd, per_unit) < 1e-6);

    const double per_100 = gradient_to_original_units(dphi, "A", rec, UnitMode::per_prescale_unit);
    CHECK(per_100 == doctest::Approx(per_unit * 100.0).epsilon(1e-12));
}

TEST_CASE("wide csv round trip preserves values and provenance comments are skipped") {
    testutil::TempDir tmp("rt");
    Rng rng(11);
    ChoiceDataset ds = testutil::random_dataset(testutil::two_alt_schema(), 25, rng, 0.0, 500.0);
    ds.respondent.assign(25, 42);
    for (auto& c : ds.choice) c = static_cast<int>(rng() % 2);

    write_wide_csv(tmp.file("out.csv"), ds, {0xabcd, 9});
    ChoiceDataset back = load_wide_csv(tmp.file("out.csv"), ds.schema);
    CHECK(back.n_rows() == ds.n_rows());
    CHECK(back.values == ds.values);
    CHECK(back.choice == ds.choice);
}

TEST_CASE("schema json round trip") {
    AttributeSchema s = testutil::three_alt_schema();
    AttributeSchema back = AttributeSchema::from_json(s.to_json());
    CHECK(back.feature_columns() == s.feature_columns());
    CHECK(back.choice_column == s.choice_column);

    AttributeSchema bad;
    bad.alternatives = {{"a", "", {"T1"}}, {"b", "C2", {}}};
    bad.choice_column = "CH";
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_SUITE_END();
