#include "loopflow/bundle_io.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "loopflow/errors.hpp"

namespace loopflow {

namespace fs = std::filesystem;

json loop_to_json(const LaurentLoop& loop) {
  json coeffs = json::object();
  for (int k = loop.kmin(); k <= loop.kmax(); ++k) {
    json entries = json::array();
    const CMat& m = loop.coeff(k);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        entries.push_back({m(r, c).real(), m(r, c).imag()});
      }
    }
    coeffs[std::to_string(k)] = entries;
  }
  return json{{"band", {loop.kmin(), loop.kmax()}},
              {"coeffs", coeffs},
              {"twisted", loop.twisted()},
              {"real", loop.real()}};
}

LaurentLoop loop_from_json(const json& j) {
  if (!j.contains("band") || !j.contains("coeffs")) {
    throw IoError("loop JSON needs 'band' and 'coeffs'");
  }
  LaurentLoop loop(j["band"][0].get<int>(), j["band"][1].get<int>());
  for (const auto& [key, entries] : j["coeffs"].items()) {
    const int k = std::stoi(key);
    if (!loop.in_band(k)) throw IoError("loop JSON: coefficient outside band");
    if (entries.size() != 9) throw IoError("loop JSON: coefficient needs 9 entries");
    CMat m;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        const auto& e = entries[static_cast<std::size_t>(3 * r + c)];
        m(r, c) = Complex(e[0].get<double>(), e[1].get<double>());
      }
    }
    loop.at(k) = m;
  }
  loop.mark_twisted(j.value("twisted", false));
  loop.mark_real(j.value("real", false));
  return loop;
}

json gridspec_to_json(const GridSpec& spec) {
  return json{{"nx", spec.nx}, {"ny", spec.ny}, {"hx", spec.hx}, {"hy", spec.hy}};
}

GridSpec gridspec_from_json(const json& j) {
  GridSpec spec;
  spec.nx = j.at("nx").get<int>();
  spec.ny = j.at("ny").get<int>();
  spec.hx = j.at("hx").get<double>();
  spec.hy = j.at("hy").get<double>();
  return spec;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw IoError("bad JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

void write_manifest(const fs::path& dir, const json& manifest) {
  fs::create_directories(dir);
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  const auto now = std::chrono::system_clock::now();
  const auto secs =
      std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
  json run{{"generated_at_unix", secs}};
  write_text(dir / "run.json", run.dump(2) + "\n");
}

json read_manifest(const fs::path& dir) { return read_json(dir / "manifest.json"); }

namespace {

void append_double(std::string& line, double v) {
  line += ',';
  line += fmt_double(v);
}

}  // namespace

void write_state_grid(const fs::path& dir, const StateGrid& grid,
                      const std::string& filename) {
  fs::create_directories(dir);
  std::string text = "i,j,k";
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      text += ",re" + std::to_string(r) + std::to_string(c);
      text += ",im" + std::to_string(r) + std::to_string(c);
    }
  }
  text += '\n';
  for (int j = 0; j < grid.spec.ny; ++j) {
    for (int i = 0; i < grid.spec.nx; ++i) {
      const LaurentLoop& xi = grid.at(i, j);
      for (int k = xi.kmin(); k <= xi.kmax(); ++k) {
        std::string line =
            std::to_string(i) + ',' + std::to_string(j) + ',' + std::to_string(k);
        const CMat& m = xi.coeff(k);
        for (int r = 0; r < 3; ++r) {
          for (int c = 0; c < 3; ++c) {
            append_double(line, m(r, c).real());
            append_double(line, m(r, c).imag());
          }
        }
        text += line;
        text += '\n';
      }
    }
  }
  write_text(dir / filename, text);
}

StateGrid read_state_grid(const fs::path& dir, const json& manifest) {
  StateGrid grid;
  grid.spec = gridspec_from_json(manifest.at("grid"));
  grid.p = manifest.at("p").get<int>();
  const int band = LaxState::band_of(grid.p);
  grid.states.assign(static_cast<std::size_t>(grid.spec.nodes()),
                     LaurentLoop(-band, band));
  const std::string filename =
      manifest.at("files").value("states", std::string("states.csv"));
  std::ifstream in(dir / filename);
  if (!in) throw IoError("cannot open: " + (dir / filename).string());
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    auto next = [&]() -> std::string {
      if (!std::getline(ss, cell, ',')) throw IoError("short row in " + filename);
      return cell;
    };
    const int i = std::stoi(next());
    const int j = std::stoi(next());
    const int k = std::stoi(next());
    CMat m;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        const double re = std::stod(next());
        const double im = std::stod(next());
        m(r, c) = Complex(re, im);
      }
    }
    grid.at(i, j).at(k) = m;
  }
  for (auto& xi : grid.states) xi.mark_real().mark_twisted();
  return grid;
}

void write_immersion_csv(const fs::path& path, const ImmersionData& data) {
  std::string text = "x,y,re_u1,im_u1,re_u2,im_u2,re_u3,im_u3,beta,rho,degenerate\n";
  const GridSpec& spec = data.spec;
  for (int j = 0; j < spec.ny; ++j) {
    for (int i = 0; i < spec.nx; ++i) {
      const std::size_t n = static_cast<std::size_t>(spec.index(i, j));
      std::string line = fmt_double(spec.x(i));
      append_double(line, spec.y(j));
      for (int c = 0; c < 3; ++c) {
        append_double(line, data.u_hat[n](c).real());
        append_double(line, data.u_hat[n](c).imag());
      }
      append_double(line, data.beta[n]);
      append_double(line, data.rho[n]);
      line += ',';
      line += std::to_string(static_cast<int>(data.degenerate[n]));
      text += line;
      text += '\n';
    }
  }
  write_text(path, text);
}

ImmersionData read_immersion_csv(const fs::path& path, const GridSpec& spec) {
  ImmersionData data;
  data.spec = spec;
  data.allocate();
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string line;
  std::getline(in, line);
  int n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (n >= spec.nodes()) throw IoError("too many rows in " + path.string());
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (vals.size() != 11) throw IoError("bad row in " + path.string());
    const std::size_t nn = static_cast<std::size_t>(n);
    data.u_hat[nn] = CVec3(Complex(vals[2], vals[3]), Complex(vals[4], vals[5]),
                           Complex(vals[6], vals[7]));
    data.beta[nn] = vals[8];
    data.rho[nn] = vals[9];
    data.degenerate[nn] = static_cast<std::uint8_t>(vals[10]);
    ++n;
  }
  if (n != spec.nodes()) throw IoError("too few rows in " + path.string());
  return data;
}

void write_residuals_csv(const fs::path& path, const ImmersionData& data) {
  std::string text = "x,y";
  for (const auto& [name, grid] : data.residuals) text += "," + name;
  text += '\n';
  const GridSpec& spec = data.spec;
  for (int j = 0; j < spec.ny; ++j) {
    for (int i = 0; i < spec.nx; ++i) {
      std::string line = fmt_double(spec.x(i));
      append_double(line, spec.y(j));
      for (const auto& [name, grid] : data.residuals) {
        append_double(line, grid[static_cast<std::size_t>(spec.index(i, j))]);
      }
      text += line;
      text += '\n';
    }
  }
  write_text(path, text);
}

std::map<std::string, std::vector<double>> read_residuals_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty residual file");
  std::vector<std::string> names;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) names.push_back(cell);
  }
  std::map<std::string, std::vector<double>> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    for (const auto& name : names) {
      if (!std::getline(ss, cell, ',')) throw IoError("short residual row");
      out[name].push_back(std::stod(cell));
    }
  }
  return out;
}

void write_frames(const fs::path& dir, const FrameFamily& frames) {
  fs::create_directories(dir);
  for (std::size_t s = 0; s < frames.lambdas.size(); ++s) {
    char name[32];
    std::snprintf(name, sizeof(name), "frames_%02zu.bin", s);
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw IoError("cannot open frame block for writing");
    for (const CMat& f : frames.frames[s]) {
      double buf[18];
      int idx = 0;
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
          buf[idx++] = f(r, c).real();
          buf[idx++] = f(r, c).imag();
        }
      }
      out.write(reinterpret_cast<const char*>(buf), sizeof(buf));
    }
  }
}

FrameFamily read_frames(const fs::path& dir, const json& manifest) {
  FrameFamily frames;
  frames.spec = gridspec_from_json(manifest.at("grid"));
  for (const auto& l : manifest.at("lambdas")) {
    frames.lambdas.emplace_back(l[0].get<double>(), l[1].get<double>());
  }
  frames.frames.assign(frames.lambdas.size(),
                       std::vector<CMat>(static_cast<std::size_t>(frames.spec.nodes())));
  for (std::size_t s = 0; s < frames.lambdas.size(); ++s) {
    char name[32];
    std::snprintf(name, sizeof(name), "frames_%02zu.bin", s);
    std::ifstream in(dir / name, std::ios::binary);
    if (!in) throw IoError("cannot open frame block: " + (dir / name).string());
    for (auto& f : frames.frames[s]) {
      double buf[18];
      in.read(reinterpret_cast<char*>(buf), sizeof(buf));
      if (!in) throw IoError("short frame block");
      int idx = 0;
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
          f(r, c) = Complex(buf[idx], buf[idx + 1]);
          idx += 2;
        }
      }
    }
  }
  return frames;
}

void write_killing(const fs::path& dir, const KillingSeries& series) {
  fs::create_directories(dir);
  for (int n = 0; n < series.stored_orders(); ++n) {
    char name[32];
    std::snprintf(name, sizeof(name), "w_%02d.csv", n);
    std::string text = "i,j";
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        text += ",re" + std::to_string(r) + std::to_string(c);
        text += ",im" + std::to_string(r) + std::to_string(c);
      }
    }
    text += '\n';
    for (int j = 0; j < series.spec.ny; ++j) {
      for (int i = 0; i < series.spec.nx; ++i) {
        std::string line = std::to_string(i) + ',' + std::to_string(j);
        const CMat& m = series.w_at(n, series.spec.index(i, j));
        for (int r = 0; r < 3; ++r) {
          for (int c = 0; c < 3; ++c) {
            append_double(line, m(r, c).real());
            append_double(line, m(r, c).imag());
          }
        }
        text += line;
        text += '\n';
      }
    }
    write_text(dir / name, text);
  }
}

void write_obj(const fs::path& obj_path, const fs::path& sidecar_csv,
               const ImmersionData& data, const ObjExportOptions& opt) {
  const GridSpec& spec = data.spec;
  if (opt.chart < 0 || opt.chart > 2) throw UsageError("chart must be 0, 1 or 2");
  const int a = (opt.chart + 1) % 3;
  const int b = (opt.chart + 2) % 3;
  std::string obj = "# loopflow surface: affine chart w = (z" + std::to_string(a + 1) +
                    "/z" + std::to_string(opt.chart + 1) + ", z" + std::to_string(b + 1) +
                    "/z" + std::to_string(opt.chart + 1) +
                    "), vertex = (Re w1, Im w1, Re w2)\n";
  std::string csv = "x,y,im_w2\n";
  for (int j = 0; j < spec.ny; ++j) {
    for (int i = 0; i < spec.nx; ++i) {
      const CVec3& u = data.u_hat[static_cast<std::size_t>(spec.index(i, j))];
      if (std::abs(u(opt.chart)) < opt.singular_tol) {
        throw ChartSingularity("chart coordinate z" + std::to_string(opt.chart + 1) +
                               " vanishes at node (" + std::to_string(i) + "," +
                               std::to_string(j) + "); pick another --chart");
      }
      const Complex w1 = u(a) / u(opt.chart);
      const Complex w2 = u(b) / u(opt.chart);
      obj += "v " + fmt_double(w1.real()) + ' ' + fmt_double(w1.imag()) + ' ' +
             fmt_double(w2.real()) + '\n';
      csv += fmt_double(spec.x(i)) + ',' + fmt_double(spec.y(j)) + ',' +
             fmt_double(w2.imag()) + '\n';
    }
  }
  for (int j = 0; j + 1 < spec.ny; ++j) {
    for (int i = 0; i + 1 < spec.nx; ++i) {
      const int v00 = spec.index(i, j) + 1;
      const int v10 = spec.index(i + 1, j) + 1;
      const int v01 = spec.index(i, j + 1) + 1;
      const int v11 = spec.index(i + 1, j + 1) + 1;
      obj += "f " + std::to_string(v00) + ' ' + std::to_string(v10) + ' ' +
             std::to_string(v11) + '\n';
      obj += "f " + std::to_string(v00) + ' ' + std::to_string(v11) + ' ' +
             std::to_string(v01) + '\n';
    }
  }
  write_text(obj_path, obj);
  write_text(sidecar_csv, csv);
}

}  // namespace loopflow
