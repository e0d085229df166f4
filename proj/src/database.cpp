#include "dbmc/database.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "dbmc/error.hpp"
#include "dbmc/noise.hpp"
#include "dbmc/parallel.hpp"

namespace dbmc {

namespace {

static_assert(std::endian::native == std::endian::little,
              "the database writer assumes a little-endian host");

constexpr char kMagic[4] = {'D', 'B', 'M', 'C'};

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_bytes(const char* data, std::size_t n) { bytes_.insert(bytes_.end(), data, data + n); }

  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    require(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  void require(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::format, "database file is truncated");
  }

  std::size_t position() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void Database::validate() const {
  const auto fail = [](const std::string& what) { throw Error(ErrorCode::format, what); };
  if (nominals.empty()) fail("database has no nominal parameters");
  for (std::size_t i = 1; i < nominals.size(); ++i)
    if (!(nominals[i] > nominals[i - 1])) fail("nominals must be strictly increasing");
  if (n_paths < 1) fail("database has no paths");
  if (controls.size() != n_paths * k()) fail("controls matrix has the wrong shape");
  if (means.size() != k()) fail("means vector has the wrong length");
  for (double v : controls)
    if (!std::isfinite(v)) fail("controls contain a non-finite value");
}

std::vector<double> column_means(std::span<const double> controls, std::size_t n_paths,
                                 std::size_t k) {
  std::vector<double> sums(k, 0.0);
  for (std::size_t j = 0; j < n_paths; ++j)
    for (std::size_t i = 0; i < k; ++i) sums[i] += controls[j * k + i];
  for (double& s : sums) s /= static_cast<double>(n_paths);
  return sums;
}

Database build_database(const LatticeModel& model, std::vector<double> nominals,
                        Observable observable, std::uint64_t n_paths,
                        std::uint64_t master_seed, unsigned workers) {
  model.validate();
  if (nominals.empty()) throw Error(ErrorCode::config, "database.nominals must not be empty");
  for (std::size_t i = 1; i < nominals.size(); ++i)
    if (!(nominals[i] > nominals[i - 1]))
      throw Error(ErrorCode::config, "database.nominals must be strictly increasing");
  if (nominals.size() > std::numeric_limits<std::uint16_t>::max())
    throw Error(ErrorCode::config, "too many nominals");
  if (n_paths < 2) throw Error(ErrorCode::config, "database.n_paths must be at least 2");

  Database db;
  db.master_seed = master_seed;
  db.generator_id = kGeneratorId;
  db.model = model;
  db.nominals = std::move(nominals);
  db.observable = observable;
  db.n_paths = n_paths;
  db.controls.assign(n_paths * db.k(), 0.0);

  const std::size_t k = db.k();
  parallel_for(n_paths, workers, [&](std::size_t j) {
    std::vector<ObservableRecord> records;
    try {
      records = simulate_paths(db.model, db.nominals, make_stream(master_seed, j));
    } catch (const Error& e) {
      throw e.with_context("database path " + std::to_string(j));
    }
    for (std::size_t i = 0; i < k; ++i) db.controls[j * k + i] = records[i].get(observable);
  });

  db.means = column_means(db.controls, n_paths, k);
  return db;
}

std::uint64_t checksum64(std::span<const std::uint8_t> bytes) {
  std::uint64_t hash = 0xCBF29CE484222325ull;
  for (std::uint8_t b : bytes) {
    hash ^= b;
    hash *= 0x100000001B3ull;
  }
  return hash;
}

std::vector<std::uint8_t> serialize_database(const Database& db) {
  ByteWriter w;
  w.put_bytes(kMagic, sizeof kMagic);
  w.put<std::uint16_t>(kDatabaseFormatVersion);
  w.put<std::uint8_t>(db.generator_id);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(db.observable));
  w.put<std::uint64_t>(db.master_seed);
  w.put<std::uint64_t>(db.n_paths);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(db.k()));
  w.put<std::uint32_t>(db.model.lattice_size);
  w.put<std::uint32_t>(db.model.n_steps);
  w.put<double>(db.model.dt);
  w.put<double>(db.model.dx);
  w.put<double>(db.model.chi);
  w.put<double>(db.model.diffusion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(db.model.boundary));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(db.model.initial.kind));
  w.put<double>(db.model.initial.value);
  w.put<std::uint32_t>(db.model.point_site.row);
  w.put<std::uint32_t>(db.model.point_site.col);
  w.put<std::uint32_t>(db.model.point_time_step);
  for (double v : db.nominals) w.put<double>(v);
  for (double v : db.controls) w.put<double>(v);
  for (double v : db.means) w.put<double>(v);
  w.put<std::uint64_t>(checksum64(w.bytes()));
  return std::move(w.bytes());
}

Database deserialize_database(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.require(sizeof kMagic);
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw Error(ErrorCode::format, "not a database file (bad magic)");
  for (std::size_t i = 0; i < sizeof kMagic; ++i) r.get<char>();

  const auto version = r.get<std::uint16_t>();
  if (version != kDatabaseFormatVersion)
    throw Error(ErrorCode::format, "unsupported database format version " + std::to_string(version));

  Database db;
  db.generator_id = r.get<std::uint8_t>();
  const auto observable = r.get<std::uint8_t>();
  if (observable < 1 || observable > 3)
    throw Error(ErrorCode::format, "unknown observable kind " + std::to_string(observable));
  db.observable = static_cast<Observable>(observable);
  db.master_seed = r.get<std::uint64_t>();
  db.n_paths = r.get<std::uint64_t>();
  const std::size_t k = r.get<std::uint16_t>();
  db.model.lattice_size = r.get<std::uint32_t>();
  db.model.n_steps = r.get<std::uint32_t>();
  db.model.dt = r.get<double>();
  db.model.dx = r.get<double>();
  db.model.chi = r.get<double>();
  db.model.diffusion = r.get<double>();
  const auto boundary = r.get<std::uint8_t>();
  if (boundary != static_cast<std::uint8_t>(Boundary::periodic))
    throw Error(ErrorCode::format, "unknown boundary condition " + std::to_string(boundary));
  db.model.boundary = Boundary::periodic;
  const auto initial = r.get<std::uint8_t>();
  if (initial > static_cast<std::uint8_t>(InitialKind::constant))
    throw Error(ErrorCode::format, "unknown initial condition " + std::to_string(initial));
  db.model.initial.kind = static_cast<InitialKind>(initial);
  db.model.initial.value = r.get<double>();
  db.model.point_site.row = r.get<std::uint32_t>();
  db.model.point_site.col = r.get<std::uint32_t>();
  db.model.point_time_step = r.get<std::uint32_t>();

  r.require(k * sizeof(double));
  db.nominals.resize(k);
  for (double& v : db.nominals) v = r.get<double>();

  // Exact size check before reading the payload, so truncation and trailing
  // garbage are both format errors.
  const std::uint64_t max_cells = (std::numeric_limits<std::uint64_t>::max() / 8) / (k ? k : 1);
  if (db.n_paths > max_cells) throw Error(ErrorCode::format, "n_paths is implausibly large");
  const std::uint64_t expected =
      r.position() + (db.n_paths * k + k) * sizeof(double) + sizeof(std::uint64_t);
  if (bytes.size() < expected) throw Error(ErrorCode::format, "database file is truncated");
  if (bytes.size() > expected) throw Error(ErrorCode::format, "trailing bytes after database");

  db.controls.resize(db.n_paths * k);
  for (double& v : db.controls) v = r.get<double>();
  db.means.resize(k);
  for (double& v : db.means) v = r.get<double>();

  const std::size_t body = r.position();
  const auto stored = r.get<std::uint64_t>();
  if (stored != checksum64(bytes.first(body)))
    throw Error(ErrorCode::checksum, "database checksum mismatch");

  try {
    db.model.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::format, std::string("invalid model in database: ") + e.what());
  }
  db.validate();
  return db;
}

void save_database(const Database& db, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = serialize_database(db);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::io, "failed writing '" + path.string() + "'");
}

Database load_database(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path.string() + "'");
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  if (in.bad()) throw Error(ErrorCode::io, "failed reading '" + path.string() + "'");
  return deserialize_database(bytes);
}

std::vector<std::uint64_t> resample_indices(std::uint64_t n_paths, std::size_t n,
                                            std::uint64_t seed) {
  if (n_paths < 1) throw Error(ErrorCode::invalid_argument, "cannot resample an empty database");
  if (n < 1) throw Error(ErrorCode::invalid_argument, "resample size must be at least 1");
  Xoshiro256pp engine(mix_seed(seed, 0x7265'7361'6D70ull));
  std::vector<std::uint64_t> out(n);
  // Lemire's multiply-shift with rejection: exactly uniform on [0, n_paths).
  const std::uint64_t threshold = (0 - n_paths) % n_paths;
  for (auto& index : out) {
    for (;;) {
      const unsigned __int128 product = static_cast<unsigned __int128>(engine()) * n_paths;
      if (static_cast<std::uint64_t>(product) >= threshold) {
        index = static_cast<std::uint64_t>(product >> 64);
        break;
      }
    }
  }
  return out;
}

std::vector<std::uint64_t> resample_indices(const Database& db, std::size_t n,
                                            std::uint64_t seed) {
  return resample_indices(db.n_paths, n, seed);
}

}  // namespace dbmc
