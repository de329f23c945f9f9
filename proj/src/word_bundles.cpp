#include <algorithm>
#include <set>

#include "zsl/data_io.hpp"
#include "zsl/errors.hpp"

namespace zsl {

namespace {

bool is_unreserved(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_' ||
         c == '.' || c == '~';
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::string percent_encode(std::string_view token) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (char ch : token) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_unreserved(c)) {
      out.push_back(ch);
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  return out;
}

std::string percent_decode(std::string_view encoded) {
  std::string out;
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    if (encoded[i] != '%') {
      out.push_back(encoded[i]);
      continue;
    }
    if (i + 2 >= encoded.size()) {
      throw InputError("truncated percent escape in '" + std::string(encoded) + "'");
    }
    const int hi = hex_value(encoded[i + 1]);
    const int lo = hex_value(encoded[i + 2]);
    if (hi < 0 || lo < 0) throw InputError("bad percent escape in '" + std::string(encoded) + "'");
    out.push_back(static_cast<char>(hi * 16 + lo));
    i += 2;
  }
  return out;
}

std::vector<WordImageBundle> load_word_image_bundles(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw InputError("bundle directory not found: " + dir.string());

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == kBundleExtension) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<WordImageBundle> bundles;
  std::set<std::string> seen;
  for (const auto& file : files) {
    WordImageBundle b;
    b.token = percent_decode(file.stem().string());
    if (b.token.empty()) throw InputError("empty token decoded from " + file.string());
    if (!seen.insert(b.token).second) {
      throw InputError("duplicate bundle token '" + b.token + "' (file " + file.string() + ")");
    }
    try {
      b.features = load_feature_matrix(file);
    } catch (const InputError& e) {
      throw InputError("unreadable bundle file " + file.string() + ": " + e.what());
    }
    bundles.push_back(std::move(b));
  }
  return bundles;
}

void save_word_image_bundle(const std::filesystem::path& dir, const WordImageBundle& bundle) {
  save_feature_matrix(dir / (percent_encode(bundle.token) + std::string(kBundleExtension)), bundle.features);
}

}  // namespace zsl
