#include "eac/concepts.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "eac/errors.hpp"

namespace eac::concepts {

bool ConceptAsset::has_tag(const std::string& tag) const {
  return std::find(category_tags.begin(), category_tags.end(), tag) != category_tags.end();
}

int ConceptAsset::param_index(const std::string& name) const {
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].name == name) return int(i);
  return -1;
}

const ParamSpec& ConceptAsset::param(const std::string& name) const {
  const int i = param_index(name);
  if (i < 0) throw NotFoundError("asset '" + asset_id + "' has no parameter '" + name + "'");
  return params[std::size_t(i)];
}

void ConceptAsset::validate() const {
  if (asset_id.empty()) throw std::invalid_argument("asset id must be non-empty");
  if (synopsis.empty()) throw std::invalid_argument("asset '" + asset_id + "' needs a synopsis");
  if (affordance_annotations.empty())
    throw std::invalid_argument("asset '" + asset_id + "' needs at least one affordance annotation");
  std::set<std::string> names;
  for (const auto& p : params) {
    if (!(p.lower < p.upper))
      throw std::invalid_argument("parameter '" + p.name + "' of '" + asset_id + "' has lower >= upper");
    if (!names.insert(p.name).second)
      throw std::invalid_argument("duplicate parameter '" + p.name + "' in '" + asset_id + "'");
  }
}

AssetInstance::AssetInstance(AssetPtr asset, const std::map<std::string, double>& values)
    : asset_(std::move(asset)) {
  for (const auto& spec : asset_->params) {
    auto it = values.find(spec.name);
    if (it == values.end())
      throw RangeError("asset '" + asset_->asset_id + "': parameter '" + spec.name + "' is unbound");
    values_.push_back(it->second);
  }
  for (const auto& [name, _] : values)
    if (asset_->param_index(name) < 0)
      throw RangeError("asset '" + asset_->asset_id + "' has no parameter '" + name + "'");
  check_and_build();
}

AssetInstance::AssetInstance(AssetPtr asset, std::vector<double> values)
    : asset_(std::move(asset)), values_(std::move(values)) {
  if (values_.size() != asset_->params.size())
    throw RangeError("asset '" + asset_->asset_id + "': expected " + std::to_string(asset_->params.size()) +
                     " parameter values");
  check_and_build();
}

void AssetInstance::check_and_build() {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const auto& spec = asset_->params[i];
    const double v = values_[i];
    if (!(v >= spec.lower && v <= spec.upper)) {
      std::ostringstream os;
      os << "asset '" << asset_->asset_id << "': parameter '" << spec.name << "' = " << v << " outside ["
         << spec.lower << ", " << spec.upper << "]";
      throw RangeError(os.str());
    }
    if (spec.integer && v != std::round(v))
      throw RangeError("asset '" + asset_->asset_id + "': parameter '" + spec.name + "' must be an integer");
  }
  if (!asset_->kernel) throw NotFoundError("asset '" + asset_->asset_id + "' has no geometry kernel");
  solid_ = asset_->kernel->build(values_);
}

double AssetInstance::value(const std::string& name) const {
  const int i = asset_->param_index(name);
  if (i < 0) throw NotFoundError("asset '" + asset_->asset_id + "' has no parameter '" + name + "'");
  return values_[std::size_t(i)];
}

std::map<std::string, double> AssetInstance::bound() const {
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < values_.size(); ++i) out[asset_->params[i].name] = values_[i];
  return out;
}

AssetPtr find_asset(const std::vector<AssetPtr>& library, const std::string& asset_id) {
  for (const auto& a : library)
    if (a->asset_id == asset_id) return a;
  return nullptr;
}

AssetPtr builtin_asset(const std::string& asset_id) {
  if (auto a = find_asset(builtin_library(), asset_id)) return a;
  std::string ids;
  for (const auto& a : builtin_library()) ids += (ids.empty() ? "" : ", ") + a->asset_id;
  throw NotFoundError("unknown asset '" + asset_id + "' (valid: " + ids + ")");
}

std::vector<AssetPtr> prune(const std::vector<AssetPtr>& library, const std::string& category) {
  std::vector<AssetPtr> out;
  for (const auto& a : library)
    if (a->has_tag(category)) out.push_back(a);
  return out;
}

std::vector<SurfaceSample> sample_surface_with_normals(const AssetInstance& inst, std::size_t n,
                                                       std::uint64_t seed) {
  if (n == 0) throw PreconditionError("sample_surface: n must be >= 1");
  Rng rng(seed);
  return sample_solid(inst.solid(), n, rng);
}

PointCloud sample_surface(const AssetInstance& inst, std::size_t n, std::uint64_t seed) {
  PointCloud cloud;
  for (const auto& s : sample_surface_with_normals(inst, n, seed)) cloud.points.push_back(s.point);
  return cloud;
}

double constraint(const AssetInstance& inst, const Vec3& p) { return inst.solid().sdf(p); }

std::vector<AffordanceRegion> affordance_regions(const AssetInstance& inst) {
  return inst.asset().kernel->regions(inst.values());
}

std::vector<Vec3> sample_region(const AssetInstance& inst, const AffordanceRegion& region, std::size_t n,
                                std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec3> out;
  out.reserve(n);
  std::size_t drawn = 0;
  const std::size_t budget = 400 * n + 10000;
  while (out.size() < n && drawn < budget) {
    const std::size_t batch = std::max<std::size_t>(n, 256);
    for (const auto& s : sample_solid(inst.solid(), batch, rng)) {
      if (region.contains(s.point)) out.push_back(s.point);
      if (out.size() == n) break;
    }
    drawn += batch;
  }
  return out;
}

// --- registry text format -------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

void write_registry(std::ostream& os, const std::vector<AssetPtr>& library) {
  os << "# concept asset registry\n";
  os << "format eac-assets 1\n";
  os << std::setprecision(17);
  for (const auto& a : library) {
    os << "\n[asset " << a->asset_id << "]\n";
    os << "tags =";
    for (std::size_t i = 0; i < a->category_tags.size(); ++i) os << (i ? ", " : " ") << a->category_tags[i];
    os << "\nsynopsis = " << a->synopsis << "\n";
    os << "annotations =";
    for (std::size_t i = 0; i < a->affordance_annotations.size(); ++i)
      os << (i ? ", " : " ") << a->affordance_annotations[i];
    os << "\n";
    for (const auto& p : a->params) {
      os << "param " << p.name << " = " << p.lower << " " << p.upper << " " << p.unit;
      if (p.integer) os << " integer";
      if (!p.geometric) os << " nongeometric";
      os << " | " << p.description << "\n";
    }
  }
}

std::vector<AssetPtr> read_registry(std::istream& is) {
  std::vector<AssetPtr> out;
  std::shared_ptr<ConceptAsset> cur;
  std::string line;
  int lineno = 0;
  bool header = false;
  auto fail = [&](const std::string& what) {
    throw ParseError("registry line " + std::to_string(lineno) + ": " + what);
  };
  auto finish = [&]() {
    if (!cur) return;
    if (auto builtin = find_asset(builtin_library(), cur->asset_id)) {
      bool same = builtin->params.size() == cur->params.size();
      for (std::size_t i = 0; same && i < cur->params.size(); ++i)
        same = builtin->params[i].name == cur->params[i].name;
      if (!same) fail("asset '" + cur->asset_id + "' parameters do not match its geometry kernel");
      cur->kernel = builtin->kernel;
    }
    try {
      cur->validate();
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
    out.push_back(cur);
    cur.reset();
  };
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "format eac-assets 1") fail("expected 'format eac-assets 1'");
      header = true;
      continue;
    }
    if (line.front() == '[') {
      finish();
      if (line.back() != ']' || line.rfind("[asset ", 0) != 0) fail("bad record header");
      cur = std::make_shared<ConceptAsset>();
      cur->asset_id = trim(line.substr(7, line.size() - 8));
      continue;
    }
    if (!cur) fail("field outside of an asset record");
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "tags") {
      cur->category_tags = split(value, ',');
    } else if (key == "synopsis") {
      cur->synopsis = value;
    } else if (key == "annotations") {
      cur->affordance_annotations = split(value, ',');
    } else if (key.rfind("param ", 0) == 0) {
      ParamSpec p;
      p.name = trim(key.substr(6));
      const auto bar = value.find('|');
      if (bar != std::string::npos) p.description = trim(value.substr(bar + 1));
      std::istringstream fields(value.substr(0, bar));
      if (!(fields >> p.lower >> p.upper >> p.unit)) fail("param needs lower upper unit");
      std::string flag;
      while (fields >> flag) {
        if (flag == "integer")
          p.integer = true;
        else if (flag == "nongeometric")
          p.geometric = false;
        else
          fail("unknown param flag '" + flag + "'");
      }
      cur->params.push_back(p);
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  finish();
  if (!header) throw ParseError("registry is empty");
  return out;
}

// --- PLY -------------------------------------------------------------------

void write_ply(std::ostream& os, const PointCloud& cloud) {
  cloud.validate();
  os << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << "\n";
  os << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_labels()) os << "property int label\n";
  os << "end_header\n" << std::setprecision(17);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    os << p.x() << " " << p.y() << " " << p.z();
    if (cloud.has_labels()) os << " " << cloud.labels[i];
    os << "\n";
  }
}

PointCloud read_ply(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || trim(line) != "ply") throw ParseError("not a PLY file");
  std::size_t count = 0;
  std::vector<std::string> props;
  bool in_vertex = false;
  for (;;) {
    if (!std::getline(is, line)) throw ParseError("PLY header not terminated");
    std::istringstream ss(trim(line));
    std::string tok;
    ss >> tok;
    if (tok == "end_header") break;
    if (tok == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt != "ascii") throw ParseError("only ASCII PLY is supported (got " + fmt + ")");
    } else if (tok == "element") {
      std::string name;
      ss >> name;
      in_vertex = name == "vertex";
      if (in_vertex) ss >> count;
    } else if (tok == "property" && in_vertex) {
      std::string type, name;
      ss >> type >> name;
      if (type == "list") throw ParseError("list properties on vertices are not supported");
      props.push_back(name);
    }
  }
  auto index_of = [&](const std::string& n) {
    auto it = std::find(props.begin(), props.end(), n);
    return it == props.end() ? -1 : int(it - props.begin());
  };
  const int ix = index_of("x"), iy = index_of("y"), iz = index_of("z"), il = index_of("label");
  if (ix < 0 || iy < 0 || iz < 0) throw ParseError("PLY vertices need x, y, z properties");
  PointCloud cloud;
  cloud.points.reserve(count);
  std::vector<double> row(props.size());
  for (std::size_t i = 0; i < count; ++i) {
    for (auto& v : row)
      if (!(is >> v)) throw ParseError("PLY truncated at vertex " + std::to_string(i));
    cloud.points.emplace_back(row[std::size_t(ix)], row[std::size_t(iy)], row[std::size_t(iz)]);
    if (il >= 0) cloud.labels.push_back(int(row[std::size_t(il)]));
  }
  return cloud;
}

void write_ply_file(const std::string& path, const PointCloud& cloud) {
  std::ofstream f(path);
  if (!f) throw PreconditionError("cannot write " + path);
  write_ply(f, cloud);
}

PointCloud read_ply_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw PreconditionError("cannot open " + path);
  return read_ply(f);
}

}  // namespace eac::concepts
