#include "maae/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace maae::ckpt {

namespace {
constexpr char kMagic[8] = {'M', 'A', 'A', 'E', 'C', 'K', 'P', '1'};
}

void Archive::add(const std::string& name, const Tensor& t) {
    for (const auto& [n, _] : tensors_)
        if (n == name) throw ConfigError("Archive: duplicate tensor " + name);
    tensors_.emplace_back(name, t);
}

const Tensor& Archive::get(const std::string& name) const {
    for (const auto& [n, t] : tensors_)
        if (n == name) return t;
    throw IoError("Archive: missing tensor " + name);
}

bool Archive::has(const std::string& name) const {
    for (const auto& [n, _] : tensors_)
        if (n == name) return true;
    return false;
}

void Archive::save(const std::string& path) const {
    nlohmann::json header;
    header["meta"] = meta;
    nlohmann::json index = nlohmann::json::array();
    for (const auto& [name, t] : tensors_) {
        nlohmann::json e;
        e["name"] = name;
        e["shape"] = t.shape();
        index.push_back(e);
    }
    header["tensors"] = index;
    const std::string js = header.dump();

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("Archive::save: cannot open " + tmp);
        out.write(kMagic, sizeof(kMagic));
        const std::uint64_t len = js.size();
        out.write(reinterpret_cast<const char*>(&len), sizeof(len));
        out.write(js.data(), static_cast<std::streamsize>(js.size()));
        for (const auto& [name, t] : tensors_)
            out.write(reinterpret_cast<const char*>(t.data()),
                      static_cast<std::streamsize>(t.numel() * sizeof(real)));
        if (!out) throw IoError("Archive::save: write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Archive Archive::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("Archive::load: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw IoError("Archive::load: bad magic in " + path);
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string js(len, '\0');
    in.read(js.data(), static_cast<std::streamsize>(len));
    const nlohmann::json header = nlohmann::json::parse(js);

    Archive a;
    a.meta = header.at("meta");
    for (const auto& e : header.at("tensors")) {
        const std::string name = e.at("name").get<std::string>();
        const std::vector<int> shape = e.at("shape").get<std::vector<int>>();
        Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(real)));
        if (!in) throw IoError("Archive::load: truncated tensor data in " + path);
        a.tensors_.emplace_back(name, std::move(t));
    }
    return a;
}

void saveParams(Archive& a, const std::vector<Param*>& params, const std::string& prefix) {
    for (const Param* p : params) a.add(prefix + p->name, p->value);
}

void loadParams(const Archive& a, const std::vector<Param*>& params, const std::string& prefix) {
    for (Param* p : params) {
        const Tensor& t = a.get(prefix + p->name);
        if (!t.sameShape(p->value))
            throw IoError("loadParams: shape mismatch for " + prefix + p->name);
        p->value = t;
    }
}

}  // namespace maae::ckpt
