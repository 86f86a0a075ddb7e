#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <utility>
#include <vector>

#include "maae/errors.hpp"
#include "maae/layers.hpp"
#include "maae/tensor.hpp"

namespace maae::ckpt {

/// Versioned container: JSON metadata plus named raw tensors.
/// Saves are atomic (write to a temp file, then rename).
class Archive {
public:
    nlohmann::json meta;

    void add(const std::string& name, const Tensor& t);
    const Tensor& get(const std::string& name) const;
    bool has(const std::string& name) const;
    const std::vector<std::pair<std::string, Tensor>>& tensors() const { return tensors_; }

    void save(const std::string& path) const;
    static Archive load(const std::string& path);

private:
    std::vector<std::pair<std::string, Tensor>> tensors_;
};

void saveParams(Archive& a, const std::vector<Param*>& params, const std::string& prefix);
void loadParams(const Archive& a, const std::vector<Param*>& params, const std::string& prefix);

}  // namespace maae::ckpt
