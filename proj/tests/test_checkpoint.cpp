#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "maae/checkpoint.hpp"

using namespace maae;
using namespace maae::ckpt;

TEST_CASE("archive round-trips metadata and tensors") {
    Archive a;
    a.meta["epoch"] = 7;
    a.meta["note"] = "hello";
    Tensor t({2, 3});
    std::mt19937_64 rng(1);
    fillNormal(t, 1.0, rng);
    a.add("w", t);
    Tensor u({4});
    u.fill(-0.25);
    a.add("b", u);

    const std::string path = "ckpt-test.bin";
    a.save(path);
    const Archive b = Archive::load(path);
    CHECK(b.meta.at("epoch").get<int>() == 7);
    CHECK(b.meta.at("note").get<std::string>() == "hello");
    CHECK(b.has("w"));
    CHECK(b.has("b"));
    CHECK_FALSE(b.has("nope"));
    CHECK(b.get("w").shape() == t.shape());
    for (std::size_t i = 0; i < t.numel(); ++i) CHECK(b.get("w")[i] == t[i]);
    for (std::size_t i = 0; i < u.numel(); ++i) CHECK(b.get("b")[i] == u[i]);
    std::filesystem::remove(path);
}

TEST_CASE("loading rejects corrupt files") {
    const std::string path = "ckpt-corrupt.bin";
    {
        std::ofstream out(path, std::ios::binary);
        out << "not a checkpoint at all";
    }
    CHECK_THROWS_AS(Archive::load(path), IoError);
    CHECK_THROWS_AS(Archive::load("ckpt-does-not-exist.bin"), IoError);
    std::filesystem::remove(path);
}

TEST_CASE("param save/load checks shapes") {
    Param p("layer.w", {2, 2});
    p.value.fill(1.5);
    Archive a;
    saveParams(a, {&p}, "net/");
    CHECK(a.has("net/layer.w"));

    Param q("layer.w", {2, 2});
    loadParams(a, {&q}, "net/");
    for (std::size_t i = 0; i < q.value.numel(); ++i) CHECK(q.value[i] == 1.5);

    Param bad("layer.w", {3, 2});
    CHECK_THROWS_AS(loadParams(a, {&bad}, "net/"), IoError);
    Param missing("other.w", {2, 2});
    CHECK_THROWS_AS(loadParams(a, {&missing}, "net/"), IoError);
}

TEST_CASE("saves are atomic: no temp file left behind") {
    Archive a;
    a.meta["k"] = 1;
    const std::string path = "ckpt-atomic.bin";
    a.save(path);
    CHECK(std::filesystem::exists(path));
    CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
    std::filesystem::remove(path);
}
