#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "support.hpp"
#include "transmusic/array_sim.hpp"
#include "transmusic/errors.hpp"
#include "transmusic/losses.hpp"
#include "transmusic/model.hpp"
#include "transmusic/rng.hpp"
#include "transmusic/spectrum.hpp"

using namespace transmusic;

namespace {

// Small enough to keep forward passes cheap in unit tests.
ModelConfig tiny_config() {
    ModelConfig c;
    c.num_antennas = 4;
    c.encoder_blocks = 1;
    c.attention_heads = 2;
    c.ffn_hidden = 8;
    c.subspace_hidden = {16};
    c.spectrum_grid = 41;
    c.peak_hidden = {16};
    c.source_count_hidden = {8};
    return c;
}

SnapshotMatrix random_snapshots(std::size_t m, std::size_t len, std::uint64_t seed) {
    SplitMix64 rng(seed);
    SnapshotMatrix s;
    s.samples = ComplexMatrix(m, len);
    for (std::size_t t = 0; t < len; ++t)
        for (std::size_t i = 0; i < m; ++i) s.samples(i, t) = complex_gaussian(rng, 1.0);
    return s;
}

} // namespace

TEST_CASE("model config validation") {
    ModelConfig c;
    c.validate();

    ModelConfig bad = c;
    bad.num_antennas = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.encoder_blocks = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.attention_heads = 5; // does not divide the width of 16
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.ffn_hidden = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.spectrum_grid = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.subspace_hidden = {128, 0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.peak_hidden = {0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.source_count_hidden = {0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("model config derived sizes") {
    ModelConfig c;
    CHECK(c.model_width() == 16);
    CHECK(c.subspace_size() == 128);
    CHECK(c.max_sources() == 7);
}

TEST_CASE("model config json round trip and defaults") {
    ModelConfig c = tiny_config();
    const ModelConfig back = ModelConfig::from_json(c.to_json());
    CHECK(back.num_antennas == c.num_antennas);
    CHECK(back.encoder_blocks == c.encoder_blocks);
    CHECK(back.attention_heads == c.attention_heads);
    CHECK(back.ffn_hidden == c.ffn_hidden);
    CHECK(back.subspace_hidden == c.subspace_hidden);
    CHECK(back.spectrum_grid == c.spectrum_grid);
    CHECK(back.peak_hidden == c.peak_hidden);
    CHECK(back.source_count_hidden == c.source_count_hidden);

    const ModelConfig partial = ModelConfig::from_json("{\"num_antennas\": 6}");
    CHECK(partial.num_antennas == 6);
    CHECK(partial.encoder_blocks == 2);
    CHECK(partial.spectrum_grid == 361);

    CHECK_THROWS_AS(ModelConfig::from_json("not json"), ConfigError);
    CHECK_THROWS_AS(ModelConfig::from_json("{\"ffn_hidden\": \"wide\"}"), ConfigError);
    CHECK_THROWS_AS(ModelConfig::from_json("{\"num_antennas\": 0}"), ConfigError);
}

TEST_CASE("expected parameter inventory for the default architecture") {
    const ModelConfig c;
    const auto params = TransMusicModel::expected_parameters(c);

    std::size_t total = 0;
    for (const auto& [name, shape] : params) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        total += n;
    }
    CHECK(total == 128430);

    // Encoder blocks plus three head stacks of two layers each.
    CHECK(params.size() == 2 * 16 + 3 * 4);

    auto shape_of = [&](const std::string& name) -> const nn::Shape& {
        for (const auto& [n, s] : params)
            if (n == name) return s;
        static const nn::Shape none;
        return none;
    };
    CHECK(shape_of("enc0.attn.q.w") == nn::Shape{16, 16});
    CHECK(shape_of("enc1.ffn.0.w") == nn::Shape{16, 64});
    CHECK(shape_of("subspace.1.w") == nn::Shape{128, 128});
    CHECK(shape_of("peak.0.w") == nn::Shape{361, 256});
    CHECK(shape_of("peak.1.b") == nn::Shape{7});
    CHECK(shape_of("sn.0.w") == nn::Shape{128, 64});
    CHECK(shape_of("sn.1.w") == nn::Shape{64, 7});
}

TEST_CASE("fresh model initialization is seeded and bounded") {
    const ModelConfig c = tiny_config();
    TransMusicModel a(c, 42);
    TransMusicModel b(c, 42);
    TransMusicModel other(c, 43);

    CHECK(a.params().total_values() == b.params().total_values());
    bool any_difference = false;
    for (const auto& [name, entry] : a.params().entries()) {
        CHECK(entry.value == b.params().at(name).value);
        if (entry.value != other.params().at(name).value) any_difference = true;
        if (entry.shape.size() == 2) {
            const double bound = std::sqrt(1.0 / static_cast<double>(entry.shape[0]));
            for (double v : entry.value) {
                CHECK(v >= -bound);
                CHECK(v <= bound);
            }
        }
    }
    CHECK(any_difference);

    // Norm gains start at one, every bias at zero.
    for (double v : a.params().at("enc0.norm1.gain").value) CHECK(v == 1.0);
    for (double v : a.params().at("peak.1.b").value) CHECK(v == 0.0);
}

TEST_CASE("constructing from a parameter store validates the inventory") {
    const ModelConfig c = tiny_config();
    TransMusicModel donor(c, 5);

    auto copy_store = [&]() {
        nn::ParamStore s;
        for (const auto& [name, entry] : donor.params().entries())
            s.add(name, entry.shape, entry.value);
        return s;
    };

    nn::ParamStore good = copy_store();
    TransMusicModel ok(c, std::move(good));
    CHECK(ok.params().total_values() == donor.params().total_values());

    nn::ParamStore extra = copy_store();
    extra.add("stray", {1}, {0.0});
    CHECK_THROWS_AS(TransMusicModel(c, std::move(extra)), ConfigError);

    nn::ParamStore renamed;
    for (const auto& [name, entry] : donor.params().entries())
        renamed.add(name == "sn.1.b" ? "sn.1.bias" : name, entry.shape, entry.value);
    CHECK_THROWS_AS(TransMusicModel(c, std::move(renamed)), ConfigError);

    nn::ParamStore reshaped;
    for (const auto& [name, entry] : donor.params().entries()) {
        if (name == "sn.1.b")
            reshaped.add(name, {2}, {0.0, 0.0});
        else
            reshaped.add(name, entry.shape, entry.value);
    }
    CHECK_THROWS_AS(TransMusicModel(c, std::move(reshaped)), ConfigError);
}

TEST_CASE("snapshot tokens split one time step into real then imaginary parts") {
    SnapshotMatrix s;
    s.samples = ComplexMatrix(2, 2);
    s.samples(0, 0) = {1.0, 2.0};
    s.samples(1, 0) = {3.0, -4.0};
    s.samples(0, 1) = {-5.0, 6.0};
    s.samples(1, 1) = {7.0, 8.0};
    CHECK(snapshot_tokens(s) == std::vector<double>{1, 3, 2, -4, -5, 7, 6, 8});
}

TEST_CASE("inference output contract") {
    const ModelConfig c = tiny_config();
    TransMusicModel model(c, 11);
    const SnapshotMatrix s = random_snapshots(4, 6, 21);
    const ModelOutput out = model.infer(s);

    REQUIRE(out.doas.size() == 3);
    const double half_pi = std::numbers::pi / 2.0;
    for (double a : out.doas) {
        CHECK(a > -half_pi);
        CHECK(a < half_pi);
    }

    REQUIRE(out.sn_probs.size() == 3);
    double total = 0.0;
    for (double p : out.sn_probs) {
        CHECK(p >= 0.0);
        total += p;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    CHECK(out.subspace.rows() == 4);
    CHECK(out.subspace.cols() == 4);

    REQUIRE(out.spectrum.values.size() == c.spectrum_grid);
    CHECK(out.spectrum.angles == make_angle_grid(c.spectrum_grid));
    CHECK(*std::max_element(out.spectrum.values.begin(), out.spectrum.values.end()) == 1.0);
    for (double v : out.spectrum.values) CHECK(v >= 0.0);
}

TEST_CASE("inference is deterministic") {
    const ModelConfig c = tiny_config();
    TransMusicModel model(c, 12);
    const SnapshotMatrix s = random_snapshots(4, 5, 22);
    const ModelOutput a = model.infer(s);
    const ModelOutput b = model.infer(s);
    CHECK(a.doas == b.doas);
    CHECK(a.sn_probs == b.sn_probs);
    CHECK(a.spectrum.values == b.spectrum.values);
}

TEST_CASE("reported spectrum agrees with the classical formula on the reported subspace") {
    const ModelConfig c = tiny_config();
    TransMusicModel model(c, 13);
    const ModelOutput out = model.infer(random_snapshots(4, 8, 23));

    SpectrumOnGrid classical =
        music_spectrum(out.subspace, ArrayGeometry::ula(c.num_antennas), c.spectrum_grid);
    const double peak = *std::max_element(classical.values.begin(), classical.values.end());
    REQUIRE(peak > 0.0);
    for (std::size_t i = 0; i < classical.values.size(); ++i)
        CHECK(out.spectrum.values[i] == doctest::Approx(classical.values[i] / peak).epsilon(1e-9));
}

TEST_CASE("snapshot order does not change the outputs") {
    const ModelConfig c = tiny_config();
    TransMusicModel model(c, 14);
    const SnapshotMatrix s = random_snapshots(4, 6, 24);

    SnapshotMatrix reversed = s;
    const std::size_t len = s.samples.cols();
    for (std::size_t t = 0; t < len; ++t)
        for (std::size_t i = 0; i < 4; ++i) reversed.samples(i, t) = s.samples(i, len - 1 - t);

    const ModelOutput a = model.infer(s);
    const ModelOutput b = model.infer(reversed);
    for (std::size_t i = 0; i < a.doas.size(); ++i)
        CHECK(a.doas[i] == doctest::Approx(b.doas[i]).epsilon(1e-10));
    for (std::size_t i = 0; i < a.sn_probs.size(); ++i)
        CHECK(a.sn_probs[i] == doctest::Approx(b.sn_probs[i]).epsilon(1e-10));
}

TEST_CASE("forward rejects mismatched snapshots") {
    const ModelConfig c = tiny_config();
    TransMusicModel model(c, 15);
    CHECK_THROWS_AS(model.infer(random_snapshots(3, 6, 25)), ConfigError);

    SnapshotMatrix empty;
    empty.samples = ComplexMatrix(4, 0);
    CHECK_THROWS_AS(model.infer(empty), ConfigError);
}

TEST_CASE("gradient isolation between the two loss branches") {
    const ModelConfig c = tiny_config();
    TransMusicModel model(c, 17);

    // Map bound tensors back to parameter names through entry pointers.
    auto name_of = [&](const nn::ParamStore::Entry* entry) -> std::string {
        for (auto& [name, e] : model.params().entries())
            if (&e == entry) return name;
        return "";
    };

    const SnapshotMatrix s = random_snapshots(4, 5, 27);

    // Source-count loss stays inside the sn head.
    {
        nn::Tape tape;
        const auto fwd = model.forward(tape, s);
        tape.backward(cross_entropy_loss(tape, 2, fwd.sn_probs));
        bool sn_nonzero = false;
        for (const auto& [entry, tensor] : fwd.bound) {
            const std::string name = name_of(entry);
            REQUIRE_FALSE(name.empty());
            const auto& g = tape.grad(tensor);
            bool nonzero = false;
            for (double v : g) nonzero = nonzero || v != 0.0;
            if (name.rfind("sn.", 0) == 0) {
                sn_nonzero = sn_nonzero || nonzero;
            } else {
                CHECK_FALSE(nonzero);
            }
        }
        CHECK(sn_nonzero);
    }

    // Angle loss reaches encoder, subspace, and peak weights but never the sn head.
    {
        nn::Tape tape;
        const auto fwd = model.forward(tape, s);
        tape.backward(rmspe_loss(tape, {0.2, -0.4}, fwd.doas));
        bool enc_nonzero = false, subspace_nonzero = false, peak_nonzero = false;
        for (const auto& [entry, tensor] : fwd.bound) {
            const std::string name = name_of(entry);
            const auto& g = tape.grad(tensor);
            bool nonzero = false;
            for (double v : g) nonzero = nonzero || v != 0.0;
            if (name.rfind("sn.", 0) == 0) CHECK_FALSE(nonzero);
            if (name.rfind("enc", 0) == 0) enc_nonzero = enc_nonzero || nonzero;
            if (name.rfind("subspace.", 0) == 0) subspace_nonzero = subspace_nonzero || nonzero;
            if (name.rfind("peak.", 0) == 0) peak_nonzero = peak_nonzero || nonzero;
        }
        CHECK(enc_nonzero);
        CHECK(subspace_nonzero);
        CHECK(peak_nonzero);
    }
}

TEST_CASE("estimated source count picks the arg max class") {
    ModelOutput out;
    out.sn_probs = {0.1, 0.5, 0.4};
    CHECK(out.estimated_sources() == 2);
    out.sn_probs = {0.4, 0.4, 0.2};
    CHECK(out.estimated_sources() == 1);
    out.sn_probs = {0.05, 0.05, 0.9};
    CHECK(out.estimated_sources() == 3);
    out.sn_probs.clear();
    CHECK_THROWS_AS(out.estimated_sources(), ConfigError);
}

TEST_CASE("periodic wrap folds angles into the half open interval") {
    const double pi = std::numbers::pi;
    CHECK(wrap_half_turn(0.0) == 0.0);
    CHECK(wrap_half_turn(0.4) == doctest::Approx(0.4));
    CHECK(wrap_half_turn(pi) == doctest::Approx(0.0));
    CHECK(wrap_half_turn(pi / 2.0) == doctest::Approx(-pi / 2.0));
    CHECK(wrap_half_turn(-pi / 2.0) == doctest::Approx(-pi / 2.0));
    CHECK(wrap_half_turn(3.0 * pi + 0.1) == doctest::Approx(0.1));
}

TEST_CASE("rmspe closed forms") {
    CHECK(rmspe({0.3}, {0.3}) == 0.0);
    CHECK(rmspe({0.3}, {0.4}) == doctest::Approx(0.1));

    // The metric searches the pairings, so order never matters.
    CHECK(rmspe({-0.2, 0.3}, {0.3, -0.2}) == doctest::Approx(0.0));
    CHECK(rmspe({-0.2, 0.3}, {-0.2, 0.3}) == doctest::Approx(0.0));

    // Identical displacement on both sources.
    CHECK(rmspe({-0.2, 0.3}, {-0.1, 0.4}) == doctest::Approx(0.1));

    // A half-turn offset aliases to zero error.
    const double pi = std::numbers::pi;
    CHECK(rmspe({0.1}, {0.1 + pi}) == doctest::Approx(0.0));

    // Near-endpoint pair wraps the short way around.
    CHECK(rmspe({-pi / 2.0 + 0.01}, {pi / 2.0 - 0.01}) == doctest::Approx(0.02));
}

TEST_CASE("rmspe chooses the assignment with minimal cost") {
    // Greedy on the first element would pair 0.0 with 0.05 and pay a large
    // second-term penalty; the search takes the cross pairing.
    const double direct = rmspe({0.0, 0.1}, {0.05, 0.9});
    const double d1 = transmusic::wrap_half_turn(0.0 - 0.05);
    const double d2 = transmusic::wrap_half_turn(0.1 - 0.9);
    const double cross1 = transmusic::wrap_half_turn(0.0 - 0.9);
    const double cross2 = transmusic::wrap_half_turn(0.1 - 0.05);
    const double best = std::min(std::sqrt((d1 * d1 + d2 * d2) / 2.0),
                                 std::sqrt((cross1 * cross1 + cross2 * cross2) / 2.0));
    CHECK(direct == doctest::Approx(best));
}

TEST_CASE("rmspe validation") {
    CHECK_THROWS_AS(rmspe({}, {}), ConfigError);
    CHECK_THROWS_AS(rmspe({0.1}, {0.1, 0.2}), ConfigError);
    CHECK_THROWS_AS(rmspe({0.1, 0.2, 0.3, 0.4, 0.5, 0.6}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}),
                    ConfigError);
    CHECK_THROWS_AS(rmspe({std::nan("")}, {0.1}), NumericError);
    CHECK_THROWS_AS(rmspe({0.1}, {std::nan("")}), NumericError);
}

TEST_CASE("rmspe loss matches the metric and only uses the leading outputs") {
    nn::Tape tape;
    const nn::Tensor doas = tape.leaf({4}, {0.31, -0.18, 0.9, -1.2});
    const std::vector<double> truth = {-0.2, 0.3};
    const nn::Tensor loss = rmspe_loss(tape, truth, doas);
    CHECK(loss.scalar() == doctest::Approx(rmspe(truth, {0.31, -0.18})));

    tape.backward(loss);
    const auto& g = tape.grad(doas);
    REQUIRE(g.size() == 4);
    CHECK(g[0] != 0.0);
    CHECK(g[1] != 0.0);
    CHECK(g[2] == 0.0);
    CHECK(g[3] == 0.0);
}

TEST_CASE("rmspe loss gradient matches finite differences") {
    const std::vector<double> truth = {-0.35, 0.22, 0.71};
    const std::vector<double> x0 = {0.2, -0.3, 0.65, 0.1, -0.9};
    auto f = [&](const std::vector<double>& v) {
        nn::Tape tape;
        return rmspe_loss(tape, truth, tape.leaf({5}, v)).scalar();
    };
    nn::Tape tape;
    const nn::Tensor doas = tape.leaf({5}, x0);
    tape.backward(rmspe_loss(tape, truth, doas));
    CHECK(test_support::max_relative_error(tape.grad(doas),
                                           test_support::numeric_gradient(f, x0)) < 1e-5);
}

TEST_CASE("rmspe loss validation") {
    nn::Tape tape;
    const nn::Tensor three = tape.leaf({3}, {0.1, 0.2, 0.3});
    CHECK_THROWS_AS(rmspe_loss(tape, {0.1, 0.2, 0.3, 0.4}, three), ConfigError);
    const nn::Tensor rank2 = tape.leaf({2, 2}, {0.1, 0.2, 0.3, 0.4});
    CHECK_THROWS_AS(rmspe_loss(tape, {0.1}, rank2), ConfigError);
}

TEST_CASE("cross entropy closed forms") {
    CHECK(cross_entropy(2, {0.2, 0.5, 0.3}) == doctest::Approx(-std::log(0.5)));
    CHECK(cross_entropy(1, {1.0, 0.0, 0.0}) == doctest::Approx(0.0));

    // Vanishing probability is floored rather than diverging.
    CHECK(cross_entropy(2, {1.0, 0.0, 0.0}) == doctest::Approx(-std::log(1e-12)));

    CHECK_THROWS_AS(cross_entropy(0, {0.5, 0.5}), ConfigError);
    CHECK_THROWS_AS(cross_entropy(3, {0.5, 0.5}), ConfigError);
    CHECK_THROWS_AS(cross_entropy(1, {std::nan(""), 0.5}), NumericError);
}

TEST_CASE("cross entropy loss value and gradient") {
    nn::Tape tape;
    const nn::Tensor probs = tape.leaf({3}, {0.2, 0.5, 0.3});
    const nn::Tensor loss = cross_entropy_loss(tape, 2, probs);
    CHECK(loss.scalar() == doctest::Approx(-std::log(0.5)));

    tape.backward(loss);
    const auto& g = tape.grad(probs);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == doctest::Approx(-2.0)); // d(-log p)/dp = -1/p
    CHECK(g[2] == 0.0);

    CHECK_THROWS_AS(cross_entropy_loss(tape, 4, probs), ConfigError);
    CHECK_THROWS_AS(cross_entropy_loss(tape, 0, probs), ConfigError);
}
