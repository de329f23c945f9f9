#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>

#include <json.hpp>

#include "zsl/data_io.hpp"
#include "zsl/errors.hpp"

namespace zsl {

namespace {

bool is_token_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '\'' ||
         c >= 0x80;
}

const nlohmann::json& require(const nlohmann::json& obj, const char* key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(line_no, std::string("missing key \"") + key + "\"");
  return *it;
}

}  // namespace

std::vector<std::string> tokenize_definition(std::string_view raw) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : raw) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_token_byte(c)) {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<std::string> split_lemma(std::string_view lemma) {
  std::vector<std::string> words;
  std::string current;
  for (char c : lemma) {
    if (c == '_' || c == ' ') {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

ClassCatalog::ClassCatalog(std::vector<ClassRecord> classes) : classes_(std::move(classes)) {
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    const auto& c = classes_[i];
    if (c.class_id.empty()) throw CatalogError("empty class_id at position " + std::to_string(i));
    if (!index_.emplace(c.class_id, i).second) throw CatalogError("duplicate class_id '" + c.class_id + "'");
    if (c.lemmas.empty()) throw CatalogError("class '" + c.class_id + "' has no lemma");
    for (const auto& lemma : c.lemmas) {
      if (lemma.empty()) throw CatalogError("class '" + c.class_id + "' has an empty lemma");
    }
  }
  for (auto& c : classes_) {
    c.parent_external = c.parent_id && !index_.contains(*c.parent_id);
  }

  // Each class has at most one parent, so walking the chain from every node
  // with a three-colour marking finds any cycle.
  enum class Mark : unsigned char { Unvisited, InProgress, Done };
  std::vector<Mark> mark(classes_.size(), Mark::Unvisited);
  for (std::size_t start = 0; start < classes_.size(); ++start) {
    std::vector<std::size_t> chain;
    std::optional<std::size_t> node = start;
    while (node && mark[*node] == Mark::Unvisited) {
      mark[*node] = Mark::InProgress;
      chain.push_back(*node);
      node = parent_index(*node);
    }
    if (node && mark[*node] == Mark::InProgress) {
      std::string cycle;
      auto first = std::find(chain.begin(), chain.end(), *node);
      for (auto it = first; it != chain.end(); ++it) cycle += classes_[*it].class_id + " -> ";
      cycle += classes_[*node].class_id;
      throw CatalogError("parent cycle: " + cycle);
    }
    for (auto i : chain) mark[i] = Mark::Done;
  }
}

std::optional<std::size_t> ClassCatalog::index_of(std::string_view class_id) const {
  auto it = index_.find(std::string(class_id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const ClassRecord& ClassCatalog::get(std::string_view class_id) const {
  auto i = index_of(class_id);
  if (!i) throw InputError("unknown class '" + std::string(class_id) + "'");
  return classes_[*i];
}

std::optional<std::size_t> ClassCatalog::parent_index(std::size_t i) const {
  const auto& c = classes_.at(i);
  if (!c.parent_id) return std::nullopt;
  return index_of(*c.parent_id);
}

ClassCatalog parse_class_catalog(std::istream& in) {
  std::vector<ClassRecord> classes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(line_no, "expected a JSON object");

    ClassRecord rec;
    const auto& id = require(obj, "class_id", line_no);
    const auto& lemmas = require(obj, "lemmas", line_no);
    const auto& definition = require(obj, "definition", line_no);
    const auto& parent = require(obj, "parent", line_no);
    if (!id.is_string()) throw ParseError(line_no, "\"class_id\" must be a string");
    if (!lemmas.is_array()) throw ParseError(line_no, "\"lemmas\" must be a list of strings");
    if (!definition.is_string()) throw ParseError(line_no, "\"definition\" must be a string");
    if (!parent.is_null() && !parent.is_string()) throw ParseError(line_no, "\"parent\" must be a string or null");

    rec.class_id = id.get<std::string>();
    for (const auto& lemma : lemmas) {
      if (!lemma.is_string()) throw ParseError(line_no, "\"lemmas\" must be a list of strings");
      auto words = split_lemma(lemma.get<std::string>());
      if (words.empty()) throw ParseError(line_no, "empty lemma in class '" + rec.class_id + "'");
      rec.lemmas.push_back(std::move(words));
    }
    rec.definition = definition.get<std::string>();
    rec.definition_tokens = tokenize_definition(rec.definition);
    if (parent.is_string()) rec.parent_id = parent.get<std::string>();
    classes.push_back(std::move(rec));
  }
  return ClassCatalog(std::move(classes));
}

ClassCatalog parse_class_catalog(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_class_catalog(in);
}

ClassCatalog load_class_catalog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open class catalog " + path.string());
  return parse_class_catalog(in);
}

}  // namespace zsl
