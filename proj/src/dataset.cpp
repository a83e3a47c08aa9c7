#include "scl/dataset.hpp"

#include "scl/errors.hpp"
#include "scl/matrix_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <charconv>
#include <numeric>
#include <random>
#include <sstream>

namespace scl {

using json = nlohmann::ordered_json;

namespace {

std::size_t parse_size(std::string_view text, std::string_view what) {
  std::size_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw UsageError("bad " + std::string(what) + " '" + std::string(text) + "'");
  }
  return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * dist(rng);
  }
  return m;
}

}  // namespace

ToyDims parse_dims(std::string_view text) {
  const auto parts = split(text, ',');
  if (parts.size() != 4) throw UsageError("--dims expects d_v,d_t,T_v,T_t");
  ToyDims d;
  d.video_dim = static_cast<Eigen::Index>(parse_size(parts[0], "dimension"));
  d.text_dim = static_cast<Eigen::Index>(parse_size(parts[1], "dimension"));
  d.video_tokens = static_cast<Eigen::Index>(parse_size(parts[2], "token count"));
  d.text_tokens = static_cast<Eigen::Index>(parse_size(parts[3], "token count"));
  if (d.video_dim < 1 || d.text_dim < 1 || d.video_tokens < 1 || d.text_tokens < 1) {
    throw UsageError("--dims entries must all be positive");
  }
  return d;
}

std::size_t GroupSpec::total() const {
  std::size_t n = 0;
  for (const auto& [size, count] : entries) n += size * count;
  return n;
}

GroupSpec parse_groups(std::string_view text) {
  GroupSpec spec;
  for (const auto part : split(text, ',')) {
    const auto fields = split(part, ':');
    if (fields.size() != 2) throw UsageError("group spec entries look like size:count, got '" + std::string(part) + "'");
    const std::size_t size = parse_size(fields[0], "group size");
    const std::size_t count = parse_size(fields[1], "group count");
    if (size < 1) throw UsageError("group size must be positive");
    spec.entries.emplace_back(size, count);
  }
  return spec;
}

std::string to_string(const GroupSpec& spec) {
  std::string out;
  for (const auto& [size, count] : spec.entries) {
    if (!out.empty()) out += ',';
    out += std::to_string(size) + ':' + std::to_string(count);
  }
  return out;
}

ToyDataset generate_synthetic(std::size_t n, const ToyDims& dims, const GroupSpec& groups, double noise,
                              std::uint64_t seed) {
  if (groups.total() != n) {
    throw UsageError("group spec " + to_string(groups) + " covers " + std::to_string(groups.total()) +
                     " samples, expected " + std::to_string(n));
  }
  if (noise < 0.0) throw UsageError("noise must be non-negative");

  std::mt19937_64 rng(seed);
  // Fixed text-to-video token mixing shared by every sample.
  const Eigen::MatrixXd mixing =
      gaussian(dims.text_dim, dims.video_dim, 1.0 / std::sqrt(static_cast<double>(dims.text_dim)), rng);

  std::vector<int> group_of_slot;
  group_of_slot.reserve(n);
  int next_group = 0;
  for (const auto& [size, count] : groups.entries) {
    for (std::size_t g = 0; g < count; ++g, ++next_group) group_of_slot.insert(group_of_slot.end(), size, next_group);
  }
  std::shuffle(group_of_slot.begin(), group_of_slot.end(), rng);

  std::vector<Eigen::MatrixXd> latent(static_cast<std::size_t>(next_group));
  for (auto& l : latent) l = gaussian(dims.text_tokens, dims.text_dim, 1.0, rng);

  ToyDataset data;
  data.dims = dims;
  data.noise = noise;
  data.seed = seed;
  data.group = group_of_slot;
  data.video.reserve(n);
  data.text.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::MatrixXd& text = latent[static_cast<std::size_t>(group_of_slot[i])];
    Eigen::MatrixXd video(dims.video_tokens, dims.video_dim);
    for (Eigen::Index r = 0; r < dims.video_tokens; ++r) video.row(r) = text.row(r % dims.text_tokens) * mixing;
    video += gaussian(dims.video_tokens, dims.video_dim, noise, rng);
    data.text.push_back(text);
    data.video.push_back(std::move(video));
  }
  return data;
}

void validate(const ToyDataset& data) {
  const std::size_t n = data.video.size();
  if (data.text.size() != n || data.group.size() != n) {
    throw FormatError("dataset has inconsistent sample counts");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = data.video[i];
    const auto& t = data.text[i];
    if (v.rows() != data.dims.video_tokens || v.cols() != data.dims.video_dim || t.rows() != data.dims.text_tokens ||
        t.cols() != data.dims.text_dim) {
      throw FormatError("sample " + std::to_string(i) + " does not match the declared dimensions");
    }
    if (!v.allFinite() || !t.allFinite()) throw FormatError("sample " + std::to_string(i) + " has non-finite values");
  }
}

void write_dataset(const ToyDataset& data, const std::filesystem::path& dir) {
  validate(data);
  std::filesystem::create_directories(dir);
  json meta;
  meta["n"] = data.size();
  meta["dims"] = {data.dims.video_dim, data.dims.text_dim, data.dims.video_tokens, data.dims.text_tokens};
  meta["noise"] = data.noise;
  meta["seed"] = data.seed;
  meta["group"] = data.group;
  write_text_file(dir / "dataset.json", meta.dump(2) + "\n");
  write_matrix_file(dir / "video.mat", data.video);
  write_matrix_file(dir / "text.mat", data.text);
}

ToyDataset read_dataset(const std::filesystem::path& dir) {
  const auto meta_path = dir / "dataset.json";
  ToyDataset data;
  std::size_t n = 0;
  try {
    const json meta = json::parse(read_text_file(meta_path));
    n = meta.at("n").get<std::size_t>();
    const auto dims = meta.at("dims").get<std::vector<Eigen::Index>>();
    if (dims.size() != 4) throw FormatError(meta_path.string() + ": dims must have 4 entries");
    data.dims = {dims[0], dims[1], dims[2], dims[3]};
    data.noise = meta.at("noise").get<double>();
    data.seed = meta.at("seed").get<std::uint64_t>();
    data.group = meta.at("group").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw FormatError(meta_path.string() + ": malformed dataset manifest: " + e.what());
  }
  data.video = read_matrix_file(dir / "video.mat", data.dims.video_dim);
  data.text = read_matrix_file(dir / "text.mat", data.dims.text_dim);
  if (data.video.size() != n || data.text.size() != n || data.group.size() != n) {
    throw FormatError(dir.string() + ": manifest declares n = " + std::to_string(n) + " but files hold " +
                      std::to_string(data.video.size()) + " video and " + std::to_string(data.text.size()) +
                      " text samples");
  }
  validate(data);
  return data;
}

}  // namespace scl
