#include "rbr/io.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <limits>
#include <string>

#include "json.hpp"

namespace rbr {

namespace {

// Payloads beyond 64 GiB are treated as corrupt headers.
constexpr std::uint64_t kMaxPayloadBytes = std::uint64_t{1} << 36;

class Writer {
 public:
  explicit Writer(const char* magic) {
    out_.insert(out_.end(), magic, magic + 4);
    out_.push_back(kFormatVersion);
  }

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v));
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void u32(std::size_t v, const char* field) {
    if (v > std::numeric_limits<std::uint32_t>::max()) {
      throw Error(ErrorCode::kDimensionOverflow,
                  std::string(field) + " = " + std::to_string(v) + " exceeds 32 bits");
    }
    u32(static_cast<std::uint32_t>(v));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }

  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, const char* magic)
      : bytes_(bytes), format_(magic) {
    need(4, "magic");
    if (std::memcmp(bytes_.data(), magic, 4) != 0) {
      std::string found;
      for (int i = 0; i < 4; ++i) {
        const char c = static_cast<char>(bytes_[i]);
        found += (c >= 32 && c < 127) ? c : '?';
      }
      throw Error(ErrorCode::kMagicMismatch, "byte 0: expected magic '" + format_ +
                                                 "', found '" + found + "'");
    }
    pos_ = 4;
    const std::uint8_t version = u8("version");
    if (version != kFormatVersion) {
      throw Error(ErrorCode::kUnsupportedVersion,
                  format_ + " byte 4: version " + std::to_string(version) +
                      " is not supported (expected " + std::to_string(kFormatVersion) + ")");
    }
  }

  std::uint8_t u8(const char* field) {
    need(1, field);
    return bytes_[pos_++];
  }
  std::uint16_t u16(const char* field) {
    need(2, field);
    const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32(const char* field) { return std::bit_cast<float>(u32(field)); }
  std::string text(std::size_t n, const char* field) {
    need(n, field);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  // Product of the factors times elem_size, rejecting absurd headers before
  // any allocation and short payloads before any read.
  std::size_t payload(std::initializer_list<std::uint64_t> factors, std::uint64_t elem_size,
                      const char* field) {
    std::uint64_t total = elem_size;
    for (std::uint64_t f : factors) {
      if (f != 0 && total > kMaxPayloadBytes / f) {
        throw Error(ErrorCode::kDimensionOverflow,
                    format_ + " byte " + std::to_string(pos_) + ": " + field +
                        " size overflows the supported range");
      }
      total *= f;
    }
    if (total > kMaxPayloadBytes) {
      throw Error(ErrorCode::kDimensionOverflow, format_ + " byte " + std::to_string(pos_) +
                                                     ": " + field + " is too large");
    }
    need(static_cast<std::size_t>(total), field);
    return static_cast<std::size_t>(total / elem_size);
  }

  void finish() const {
    if (pos_ != bytes_.size()) {
      throw Error(ErrorCode::kFormat, format_ + " byte " + std::to_string(pos_) + ": " +
                                          std::to_string(bytes_.size() - pos_) +
                                          " trailing bytes");
    }
  }

  std::size_t pos() const { return pos_; }
  const std::string& format() const { return format_; }

 private:
  void need(std::size_t n, const char* field) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCode::kTruncatedFile,
                  format_ + " truncated at byte " + std::to_string(bytes_.size()) + ": " +
                      field + " needs " + std::to_string(n) + " bytes from offset " +
                      std::to_string(pos_));
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::string format_;
  std::size_t pos_ = 0;
};

void check_nonzero(const Reader& r, std::uint32_t v, const char* field) {
  if (v == 0) {
    throw Error(ErrorCode::kFormat,
                r.format() + " byte " + std::to_string(r.pos()) + ": " + field + " is zero");
  }
}

}  // namespace

// ---- files ------------------------------------------------------------------

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for reading");
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kIo, "read failed on '" + path.string() + "'");
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed on '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// ---- feature grids ----------------------------------------------------------------

Bytes encode_feature_grid(const FeatureGrid& grid) {
  grid.validate();
  Writer w("RBRF");
  w.u32(grid.dim);
  w.u32(grid.grid_h);
  w.u32(grid.grid_w);
  w.u32(grid.patch);
  w.u32(grid.image_dims.height);
  w.u32(grid.image_dims.width);
  for (float v : grid.data) w.f32(v);
  return w.take();
}

FeatureGrid decode_feature_grid(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "RBRF");
  FeatureGrid g;
  g.dim = r.u32("dim");
  g.grid_h = r.u32("grid_h");
  g.grid_w = r.u32("grid_w");
  g.patch = r.u32("patch");
  g.image_dims.height = r.u32("image_h");
  g.image_dims.width = r.u32("image_w");
  const std::size_t n = r.payload({g.dim, g.grid_h, g.grid_w}, 4, "feature data");
  g.data.resize(n);
  for (float& v : g.data) v = r.f32("feature data");
  r.finish();
  g.validate();
  return g;
}

void save_feature_grid(const std::filesystem::path& path, const FeatureGrid& grid) {
  write_file(path, encode_feature_grid(grid));
}

FeatureGrid load_feature_grid(const std::filesystem::path& path) {
  return decode_feature_grid(read_file(path));
}

// ---- label maps ----------------------------------------------------------------

Bytes encode_label_map(const LabelMap& map) {
  map.validate();
  Writer w("RBLM");
  w.u32(map.dims.height);
  w.u32(map.dims.width);
  w.u32(static_cast<std::uint32_t>(map.num_classes));
  for (std::uint16_t v : map.labels) w.u16(v);
  return w.take();
}

LabelMap decode_label_map(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "RBLM");
  LabelMap m;
  m.dims.height = r.u32("height");
  m.dims.width = r.u32("width");
  const std::uint32_t classes = r.u32("num_classes");
  if (classes >= kIgnoreLabel) {
    throw Error(ErrorCode::kDimensionOverflow,
                "RBLM byte 13: " + std::to_string(classes) + " classes do not fit 16-bit labels");
  }
  m.num_classes = static_cast<std::uint16_t>(classes);
  const std::size_t n = r.payload({m.dims.height, m.dims.width}, 2, "labels");
  m.labels.resize(n);
  for (std::uint16_t& v : m.labels) v = r.u16("labels");
  r.finish();
  m.validate();
  return m;
}

void save_label_map(const std::filesystem::path& path, const LabelMap& map) {
  write_file(path, encode_label_map(map));
}

LabelMap load_label_map(const std::filesystem::path& path) {
  return decode_label_map(read_file(path));
}

// ---- region vectors ----------------------------------------------------------------

Bytes encode_region_vectors(std::span<const RegionVector> vectors) {
  const std::size_t dim = vectors.empty() ? 0 : vectors.front().values.size();
  Writer w("RBRV");
  w.u32(vectors.size(), "count");
  w.u32(dim, "dim");
  for (const RegionVector& v : vectors) {
    if (v.values.size() != dim) {
      throw Error(ErrorCode::kDimsMismatch, "region vectors differ in width");
    }
    w.u32(v.image_id);
    w.u32(v.region_id);
    for (float x : v.values) w.f32(x);
  }
  return w.take();
}

std::vector<RegionVector> decode_region_vectors(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "RBRV");
  const std::uint32_t count = r.u32("count");
  const std::uint32_t dim = r.u32("dim");
  r.payload({count, std::uint64_t{dim} + 2}, 4, "records");
  std::vector<RegionVector> out(count);
  for (RegionVector& v : out) {
    v.image_id = r.u32("image_id");
    v.region_id = r.u32("region_id");
    v.values.resize(dim);
    for (float& x : v.values) x = r.f32("values");
  }
  r.finish();
  return out;
}

void save_region_vectors(const std::filesystem::path& path,
                         std::span<const RegionVector> vectors) {
  write_file(path, encode_region_vectors(vectors));
}

std::vector<RegionVector> load_region_vectors(const std::filesystem::path& path) {
  return decode_region_vectors(read_file(path));
}

// ---- point maps ----------------------------------------------------------------

Bytes encode_point_map(const PointMap& map) {
  map.validate();
  Writer w("RBPM");
  w.u32(map.dims.height);
  w.u32(map.dims.width);
  for (float v : map.xyz) w.f32(v);
  const std::size_t n = map.dims.pixels();
  for (std::size_t byte = 0; byte < (n + 7) / 8; ++byte) {
    std::uint8_t packed = 0;
    for (std::size_t bit = 0; bit < 8 && byte * 8 + bit < n; ++bit) {
      if (map.valid[byte * 8 + bit]) packed |= static_cast<std::uint8_t>(1u << bit);
    }
    w.u8(packed);
  }
  return w.take();
}

PointMap decode_point_map(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "RBPM");
  PointMap m;
  m.dims.height = r.u32("height");
  m.dims.width = r.u32("width");
  check_nonzero(r, m.dims.height, "height");
  check_nonzero(r, m.dims.width, "width");
  const std::size_t n = r.payload({m.dims.height, m.dims.width, 3}, 4, "xyz") / 3;
  m.xyz.resize(3 * n);
  for (float& v : m.xyz) v = r.f32("xyz");
  r.payload({(n + 7) / 8}, 1, "validity bitmap");
  m.valid.resize(n);
  for (std::size_t byte = 0; byte < (n + 7) / 8; ++byte) {
    const std::uint8_t packed = r.u8("validity bitmap");
    for (std::size_t bit = 0; bit < 8; ++bit) {
      const bool set = (packed >> bit) & 1u;
      if (byte * 8 + bit < n) {
        m.valid[byte * 8 + bit] = set ? 1 : 0;
      } else if (set) {
        throw Error(ErrorCode::kFormat, "RBPM byte " + std::to_string(r.pos() - 1) +
                                            ": padding bits of the validity bitmap are set");
      }
    }
  }
  r.finish();
  return m;
}

void save_point_map(const std::filesystem::path& path, const PointMap& map) {
  write_file(path, encode_point_map(map));
}

PointMap load_point_map(const std::filesystem::path& path) {
  return decode_point_map(read_file(path));
}

// ---- decoder checkpoints ------------------------------------------------------------

Bytes encode_decoder(const Decoder& decoder) {
  const DecoderSpec& spec = decoder.spec();
  Writer w("RBDC");
  w.u32(static_cast<std::uint32_t>(spec.kind));
  w.u32(spec.input_dim, "input_dim");
  w.u32(spec.num_classes, "num_classes");
  w.u32(spec.hidden, "hidden");
  w.u32(spec.blocks, "blocks");
  w.u32(spec.heads, "heads");
  const auto params = decoder.params();
  w.u32(params.size(), "parameter count");
  for (const Param* p : params) {
    w.u32(p->name.size(), "name length");
    w.bytes(p->name);
    w.u32(p->shape.size(), "rank");
    for (std::size_t s : p->shape) w.u32(s, "shape");
    for (double v : p->value) w.f32(static_cast<float>(v));
  }
  return w.take();
}

std::unique_ptr<Decoder> decode_decoder(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "RBDC");
  DecoderSpec spec;
  const std::uint32_t kind = r.u32("kind");
  if (kind > static_cast<std::uint32_t>(DecoderKind::kTransformer)) {
    throw Error(ErrorCode::kFormat, "RBDC byte 5: unknown decoder kind " + std::to_string(kind));
  }
  spec.kind = static_cast<DecoderKind>(kind);
  spec.input_dim = r.u32("input_dim");
  spec.num_classes = r.u32("num_classes");
  spec.hidden = r.u32("hidden");
  spec.blocks = r.u32("blocks");
  spec.heads = r.u32("heads");
  try {
    spec.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kFormat, std::string("RBDC header: ") + e.what());
  }
  for (std::uint64_t dim : {spec.input_dim, spec.num_classes, spec.hidden}) {
    if (dim * dim > kMaxPayloadBytes) {
      throw Error(ErrorCode::kDimensionOverflow, "RBDC header: layer width " +
                                                     std::to_string(dim) + " is too large");
    }
  }
  auto decoder = make_decoder(spec, 0);
  auto params = decoder->params();
  const std::uint32_t count = r.u32("parameter count");
  if (count != params.size()) {
    throw Error(ErrorCode::kFormat, "RBDC byte " + std::to_string(r.pos() - 4) + ": " +
                                        std::to_string(count) + " parameters, expected " +
                                        std::to_string(params.size()));
  }
  for (Param* p : params) {
    const std::size_t at = r.pos();
    const std::uint32_t name_len = r.u32("name length");
    const std::string name = r.text(name_len, "name");
    const std::uint32_t rank = r.u32("rank");
    std::vector<std::size_t> shape(rank);
    for (std::size_t& s : shape) s = r.u32("shape");
    if (name != p->name || shape != p->shape) {
      throw Error(ErrorCode::kFormat, "RBDC byte " + std::to_string(at) + ": parameter '" +
                                          name + "' does not match expected '" + p->name +
                                          "'");
    }
    r.payload({p->value.size()}, 4, "parameter values");
    for (double& v : p->value) v = r.f32("parameter values");
  }
  r.finish();
  return decoder;
}

void save_decoder(const std::filesystem::path& path, const Decoder& decoder) {
  write_file(path, encode_decoder(decoder));
}

std::unique_ptr<Decoder> load_decoder(const std::filesystem::path& path) {
  return decode_decoder(read_file(path));
}

// ---- retrieval index ----------------------------------------------------------------

Bytes encode_index(const RetrievalIndex& index) {
  Writer w("RBIX");
  w.u32(index.rows(), "rows");
  w.u32(index.dim());
  w.u8(index.normalized() ? 1 : 0);
  for (std::uint32_t id : index.image_ids()) w.u32(id);
  for (std::uint32_t id : index.region_ids()) w.u32(id);
  for (float v : index.matrix()) w.f32(v);
  return w.take();
}

RetrievalIndex decode_index(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "RBIX");
  const std::uint32_t rows = r.u32("rows");
  const std::uint32_t dim = r.u32("dim");
  const std::uint8_t normalized = r.u8("normalized");
  if (normalized > 1) {
    throw Error(ErrorCode::kFormat, "RBIX byte 13: normalized flag must be 0 or 1");
  }
  r.payload({rows, std::uint64_t{dim} + 2}, 4, "index payload");
  std::vector<std::uint32_t> image_ids(rows);
  std::vector<std::uint32_t> region_ids(rows);
  std::vector<float> matrix(static_cast<std::size_t>(rows) * dim);
  for (auto& id : image_ids) id = r.u32("image ids");
  for (auto& id : region_ids) id = r.u32("region ids");
  for (float& v : matrix) v = r.f32("matrix");
  r.finish();
  return RetrievalIndex::from_parts(dim, normalized != 0, std::move(matrix),
                                    std::move(image_ids), std::move(region_ids));
}

void save_index(const std::filesystem::path& path, const RetrievalIndex& index) {
  write_file(path, encode_index(index));
}

RetrievalIndex load_index(const std::filesystem::path& path) {
  return decode_index(read_file(path));
}

// ---- token batches ----------------------------------------------------------------

Bytes encode_token_batch(const TokenBatch& batch) {
  batch.validate();
  Writer w("RBTB");
  w.u32(batch.size(), "tokens");
  w.u32(batch.dim, "dim");
  w.u32(batch.truncated, "truncated");
  w.u32(batch.missing_geometry, "missing_geometry");
  for (float v : batch.tokens) w.f32(v);
  for (std::uint8_t m : batch.attention_mask) w.u8(m ? 1 : 0);
  for (const TokenProvenance& p : batch.provenance) {
    w.u32(p.image_id);
    w.u32(p.region_id);
    w.u32(p.frame_index);
  }
  return w.take();
}

TokenBatch decode_token_batch(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "RBTB");
  TokenBatch b;
  const std::uint32_t t = r.u32("tokens");
  b.dim = r.u32("dim");
  b.truncated = r.u32("truncated");
  b.missing_geometry = r.u32("missing_geometry");
  r.payload({t, b.dim}, 4, "tokens");
  b.tokens.resize(static_cast<std::size_t>(t) * b.dim);
  for (float& v : b.tokens) v = r.f32("tokens");
  b.attention_mask.resize(t);
  for (std::uint8_t& m : b.attention_mask) {
    m = r.u8("attention mask");
    if (m > 1) {
      throw Error(ErrorCode::kFormat,
                  "RBTB byte " + std::to_string(r.pos() - 1) + ": mask byte must be 0 or 1");
    }
  }
  r.payload({t, 3}, 4, "provenance");
  b.provenance.resize(t);
  for (TokenProvenance& p : b.provenance) {
    p.image_id = r.u32("provenance");
    p.region_id = r.u32("provenance");
    p.frame_index = r.u32("provenance");
  }
  r.finish();
  b.validate();
  return b;
}

void save_token_batch(const std::filesystem::path& path, const TokenBatch& batch) {
  write_file(path, encode_token_batch(batch));
}

TokenBatch load_token_batch(const std::filesystem::path& path) {
  return decode_token_batch(read_file(path));
}

// ---- mask sets ----------------------------------------------------------------

namespace {

// Runs over an arbitrary pixel visiting order; `linear(k)` maps the k-th
// visited pixel to its row-major index.
template <typename Linear>
std::vector<std::uint32_t> reorder_runs(ImageDims dims, std::span<const std::uint32_t> runs,
                                        Linear&& to_source) {
  const std::size_t n = dims.pixels();
  std::vector<std::uint8_t> bits(n, 0);
  std::size_t pos = 0;
  bool fg = false;
  for (std::uint32_t run : runs) {
    if (pos + run > n) throw Error(ErrorCode::kFormat, "runs exceed the pixel count");
    if (fg) std::fill(bits.begin() + pos, bits.begin() + pos + run, 1);
    pos += run;
    fg = !fg;
  }
  if (pos != n) {
    throw Error(ErrorCode::kFormat, "runs sum to " + std::to_string(pos) + ", expected " +
                                        std::to_string(n));
  }
  std::vector<std::uint32_t> out;
  bool current = false;
  std::uint32_t length = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const bool v = bits[to_source(k)] != 0;
    if (v != current) {
      out.push_back(length);
      current = v;
      length = 0;
    }
    ++length;
  }
  out.push_back(length);
  return out;
}

}  // namespace

std::vector<std::uint32_t> rle_row_to_column_major(ImageDims dims,
                                                   std::span<const std::uint32_t> runs) {
  // Visit column-major; source bits are row-major.
  const std::size_t h = dims.height;
  const std::size_t w = dims.width;
  return reorder_runs(dims, runs, [&](std::size_t k) { return (k % h) * w + k / h; });
}

std::vector<std::uint32_t> rle_column_to_row_major(ImageDims dims,
                                                   std::span<const std::uint32_t> runs) {
  const std::size_t h = dims.height;
  const std::size_t w = dims.width;
  return reorder_runs(dims, runs, [&](std::size_t k) { return (k % w) * h + k / w; });
}

std::string encode_mask_set(const MaskSet& set) {
  set.validate();
  nlohmann::json masks = nlohmann::json::array();
  for (std::size_t i = 0; i < set.masks.size(); ++i) {
    masks.push_back({{"id", i},
                     {"source", mask_source_name(set.masks[i].source())},
                     {"rle", set.masks[i].runs()}});
  }
  nlohmann::json doc = {{"height", set.dims.height},
                        {"width", set.dims.width},
                        {"rle_order", "row-major"},
                        {"masks", std::move(masks)}};
  return doc.dump() + "\n";
}

MaskSet decode_mask_set(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kFormat, "mask set JSON, byte " + std::to_string(e.byte) + ": " +
                                        e.what());
  }
  auto dim_field = [&](const char* key) -> std::uint32_t {
    if (!doc.is_object() || !doc.contains(key) || !doc[key].is_number_unsigned()) {
      throw Error(ErrorCode::kFormat,
                  std::string("mask set JSON needs a non-negative integer '") + key + "'");
    }
    const auto v = doc[key].get<std::uint64_t>();
    if (v == 0 || v > std::numeric_limits<std::uint32_t>::max()) {
      throw Error(ErrorCode::kDimensionOverflow,
                  std::string("mask set '") + key + "' = " + std::to_string(v) +
                      " is outside [1, 2^32)");
    }
    return static_cast<std::uint32_t>(v);
  };
  MaskSet set;
  set.dims = {dim_field("height"), dim_field("width")};
  bool column_major = false;
  if (doc.contains("rle_order")) {
    const auto order = doc["rle_order"].is_string() ? doc["rle_order"].get<std::string>() : "";
    if (order == "column-major") {
      column_major = true;
    } else if (order != "row-major") {
      throw Error(ErrorCode::kFormat, "rle_order must be \"row-major\" or \"column-major\"");
    }
  }
  if (!doc.contains("masks") || !doc["masks"].is_array()) {
    throw Error(ErrorCode::kFormat, "mask set JSON needs a 'masks' array");
  }
  for (std::size_t i = 0; i < doc["masks"].size(); ++i) {
    const nlohmann::json& m = doc["masks"][i];
    const std::string id = m.contains("id") ? m["id"].dump() : std::to_string(i);
    try {
      if (!m.is_object() || !m.contains("rle") || !m["rle"].is_array()) {
        throw Error(ErrorCode::kFormat, "missing 'rle' array");
      }
      std::vector<std::uint32_t> runs;
      runs.reserve(m["rle"].size());
      for (const auto& v : m["rle"]) {
        if (!v.is_number_unsigned() || v.get<std::uint64_t>() > 0xFFFFFFFFull) {
          throw Error(ErrorCode::kFormat, "run lengths must be unsigned 32-bit integers");
        }
        runs.push_back(v.get<std::uint32_t>());
      }
      if (column_major) runs = rle_column_to_row_major(set.dims, runs);
      MaskSource source = MaskSource::kOther;
      if (m.contains("source")) {
        if (!m["source"].is_string()) throw Error(ErrorCode::kFormat, "'source' must be a string");
        source = parse_mask_source(m["source"].get<std::string>());
      }
      set.masks.push_back(RegionMask::from_runs(set.dims, runs, source));
    } catch (const Error& e) {
      const ErrorCode code =
          e.code() == ErrorCode::kEmptyMask ? ErrorCode::kEmptyMask : ErrorCode::kFormat;
      throw Error(code, "mask id " + id + ": " + e.what());
    }
  }
  return set;
}

void save_mask_set(const std::filesystem::path& path, const MaskSet& set) {
  write_text_file(path, encode_mask_set(set));
}

MaskSet load_mask_set(const std::filesystem::path& path) {
  return decode_mask_set(read_text_file(path));
}

// ---- PPM ----------------------------------------------------------------

RgbImage decode_ppm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&](const char* field) -> std::uint64_t {
    skip_space();
    const std::size_t start = pos;
    std::uint64_t v = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      v = v * 10 + (bytes[pos] - '0');
      if (v > std::numeric_limits<std::uint32_t>::max()) {
        throw Error(ErrorCode::kDimensionOverflow,
                    std::string("PPM ") + field + " at byte " + std::to_string(start) +
                        " is too large");
      }
      ++pos;
    }
    if (pos == start) {
      if (pos >= bytes.size()) {
        throw Error(ErrorCode::kTruncatedFile,
                    std::string("PPM header truncated before ") + field);
      }
      throw Error(ErrorCode::kFormat,
                  std::string("PPM byte ") + std::to_string(pos) + ": expected " + field);
    }
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    throw Error(ErrorCode::kMagicMismatch, "byte 0: expected binary PPM magic 'P6'");
  }
  pos = 2;
  RgbImage img;
  img.dims.width = static_cast<std::uint32_t>(number("width"));
  img.dims.height = static_cast<std::uint32_t>(number("height"));
  const std::uint64_t maxval = number("maxval");
  if (maxval != 255) {
    throw Error(ErrorCode::kFormat, "PPM maxval " + std::to_string(maxval) +
                                        " is not supported (only 255)");
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw Error(ErrorCode::kFormat, "PPM byte " + std::to_string(pos) +
                                        ": expected one whitespace byte after maxval");
  }
  ++pos;
  check_dims(img.dims);
  const std::uint64_t need = 3ull * img.dims.height * img.dims.width;
  if (need > kMaxPayloadBytes) {
    throw Error(ErrorCode::kDimensionOverflow, "PPM raster is too large");
  }
  if (bytes.size() - pos < need) {
    throw Error(ErrorCode::kTruncatedFile,
                "PPM truncated at byte " + std::to_string(bytes.size()) + ": raster needs " +
                    std::to_string(need) + " bytes from offset " + std::to_string(pos));
  }
  if (bytes.size() - pos > need) {
    throw Error(ErrorCode::kFormat, "PPM byte " + std::to_string(pos + need) + ": " +
                                        std::to_string(bytes.size() - pos - need) +
                                        " trailing bytes");
  }
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return img;
}

Bytes encode_ppm(const RgbImage& image) {
  image.validate();
  const std::string header = "P6\n" + std::to_string(image.dims.width) + " " +
                             std::to_string(image.dims.height) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

RgbImage load_ppm(const std::filesystem::path& path) { return decode_ppm(read_file(path)); }

void save_ppm(const std::filesystem::path& path, const RgbImage& image) {
  write_file(path, encode_ppm(image));
}

}  // namespace rbr
