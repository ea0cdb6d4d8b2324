#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace cgcre {

// String-to-id table with a reserved UNK entry at id 0. Lookup of an unseen
// string falls back to UNK, so models stay total over noisy inputs.
class LabelVocab {
 public:
  static constexpr const char* kUnk = "<unk>";

  LabelVocab() { add(kUnk); }

  explicit LabelVocab(const std::vector<std::string>& names) {
    for (const std::string& n : names) add(n);
  }

  int add(const std::string& name) {
    auto it = ids_.find(name);
    if (it != ids_.end()) return it->second;
    int id = static_cast<int>(names_.size());
    names_.push_back(name);
    ids_.emplace(name, id);
    return id;
  }

  int id(const std::string& name) const {
    auto it = ids_.find(name);
    return it == ids_.end() ? 0 : it->second;
  }

  bool contains(const std::string& name) const { return ids_.count(name) > 0; }
  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace cgcre
