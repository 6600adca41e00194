#include "seismo/wavesim.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iostream>
#include <numbers>

#include "seismo/io.hpp"

namespace seismo::wavesim {

namespace {

constexpr int kHalo = 4;
// 8th-order second-derivative coefficients.
constexpr double kC0 = -205.0 / 72.0;
constexpr double kC[4] = {8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0};

std::string pos_list(const std::vector<GridPos>& ps) {
    std::string s;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (i) s += ';';
        s += std::to_string(ps[i].row) + ':' + std::to_string(ps[i].col);
    }
    return s;
}

std::vector<GridPos> parse_pos_list(const std::string& text) {
    std::vector<GridPos> out;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find(';', start);
        if (end == std::string::npos) end = text.size();
        const std::string tok = text.substr(start, end - start);
        const auto colon = tok.find(':');
        if (colon == std::string::npos) throw std::runtime_error("bad position list: " + text);
        out.push_back({std::stoi(tok.substr(0, colon)), std::stoi(tok.substr(colon + 1))});
        start = end + 1;
    }
    return out;
}

void validate_geometry(int height, int width, const SimConfig& config) {
    if (height < 1 || width < 1) throw std::invalid_argument("velocity model must be non-empty");
    if (config.dx <= 0.0 || config.dt <= 0.0 || config.nt < 1) throw std::invalid_argument("dx, dt, nt must be positive");
    if (config.boundary_width < 1) throw std::invalid_argument("sponge width must be at least one cell");
    if (config.sources.empty() || config.receivers.empty())
        throw std::invalid_argument("need at least one source and one receiver");
    auto inside = [&](const GridPos& p) { return p.row >= 0 && p.row < height && p.col >= 0 && p.col < width; };
    for (const auto& p : config.sources)
        if (!inside(p)) throw std::invalid_argument("source position outside the model interior");
    for (const auto& p : config.receivers)
        if (!inside(p)) throw std::invalid_argument("receiver position outside the model interior");
}

}  // namespace

SimConfig SimConfig::surface_acquisition(int height, int width, int shots) {
    (void)height;
    if (shots < 1) throw std::invalid_argument("need at least one shot");
    SimConfig c;
    for (int k = 0; k < shots; ++k)
        c.sources.push_back({0, static_cast<int>(std::floor((k + 0.5) * width / shots))});
    for (int col = 0; col < width; ++col) c.receivers.push_back({0, col});
    return c;
}

std::vector<double> ricker_wavelet(double peak_frequency, double dt, int nt) {
    if (!(peak_frequency > 0.0) || !(dt > 0.0)) throw std::invalid_argument("ricker: frequency and dt must be positive");
    const double t0 = 1.5 / peak_frequency;
    if (nt * dt < 2.0 * t0)
        std::cerr << "warning: ricker wavelet main lobe (" << 2.0 * t0 << " s) exceeds record length " << nt * dt
                  << " s\n";
    std::vector<double> w(std::max(nt, 0));
    const double a = std::numbers::pi * std::numbers::pi * peak_frequency * peak_frequency;
    for (int i = 0; i < nt; ++i) {
        const double tau = i * dt - t0;
        w[i] = (1.0 - 2.0 * a * tau * tau) * std::exp(-a * tau * tau);
    }
    return w;
}

CflReport cfl_check(const SimConfig& config, std::span<const float> velocity) {
    CflReport r;
    for (float v : velocity) {
        if (!(v > 0.0f)) throw std::invalid_argument("velocity must be positive");
        r.v_max = std::max(r.v_max, static_cast<double>(v));
    }
    r.max_stable_dt = config.cfl_coeff * config.dx / r.v_max;
    r.pass = config.dt <= r.max_stable_dt;
    return r;
}

std::vector<ShotResult> propagate(const datagen::VelocityMap& map, const SimConfig& config) {
    return propagate(map.height, map.width, map.grid, config);
}

std::vector<ShotResult> propagate(int height, int width, std::span<const float> velocity, const SimConfig& config) {
    validate_geometry(height, width, config);
    if (velocity.size() != static_cast<std::size_t>(height) * width)
        throw std::invalid_argument("velocity array does not match model dimensions");
    const CflReport cfl = cfl_check(config, velocity);
    if (!cfl.pass)
        throw SimulationError("CFL violation: dt=" + io::format_double(config.dt) +
                              " exceeds stable bound " + io::format_double(cfl.max_stable_dt));

    const int b = config.boundary_width;
    const int off = b + kHalo;
    const int hp = height + 2 * off, wp = width + 2 * off;
    const std::size_t np = static_cast<std::size_t>(hp) * wp;
    auto idx = [wp](int r, int c) { return static_cast<std::size_t>(r) * wp + c; };

    // Per-cell update coefficients over the padded grid.
    std::vector<double> vdt2(np, 0.0), damp_new(np, 1.0), damp_old(np, 1.0);
    const double eta_max = 3.0 * cfl.v_max * std::log(1.0 / config.sponge_reflection) / (2.0 * b * config.dx);
    for (int r = 0; r < hp; ++r)
        for (int c = 0; c < wp; ++c) {
            const int rr = std::clamp(r - off, 0, height - 1), cc = std::clamp(c - off, 0, width - 1);
            const double v = velocity[static_cast<std::size_t>(rr) * width + cc];
            vdt2[idx(r, c)] = v * v * config.dt * config.dt;
            const int dr = std::max({0, off - r, r - (off + height - 1)});
            const int dc = std::max({0, off - c, c - (off + width - 1)});
            const double d = std::min(1.0, std::hypot(dr, dc) / b);
            const double eta = eta_max * d * d;
            damp_new[idx(r, c)] = 1.0 / (1.0 + 0.5 * eta * config.dt);
            damp_old[idx(r, c)] = 1.0 - 0.5 * eta * config.dt;
        }

    const std::vector<double> wavelet = ricker_wavelet(config.peak_frequency, config.dt, config.nt);
    const double inv_dx2 = 1.0 / (config.dx * config.dx);

    std::vector<ShotResult> results(config.sources.size());
    std::vector<std::exception_ptr> failures(config.sources.size());

#pragma omp parallel for schedule(dynamic)
    for (std::size_t shot = 0; shot < config.sources.size(); ++shot) {
      try {
        const GridPos src = config.sources[shot];
        // Spatial source weights (already divided by cell area).
        std::vector<std::pair<std::size_t, double>> src_cells;
        if (config.source_radius <= 0.0) {
            src_cells.push_back({idx(src.row + off, src.col + off), inv_dx2});
        } else {
            const double sigma = config.source_radius;
            const int reach = static_cast<int>(std::ceil(6.0 * sigma / config.dx));
            const double norm = 1.0 / (2.0 * std::numbers::pi * sigma * sigma);
            for (int r = src.row - reach; r <= src.row + reach; ++r)
                for (int c = src.col - reach; c <= src.col + reach; ++c) {
                    if (r + off < kHalo || r + off >= hp - kHalo || c + off < kHalo || c + off >= wp - kHalo) continue;
                    const double d2 = (std::pow(r - src.row, 2) + std::pow(c - src.col, 2)) * config.dx * config.dx;
                    src_cells.push_back({idx(r + off, c + off), norm * std::exp(-0.5 * d2 / (sigma * sigma))});
                }
        }

        ShotResult& out = results[shot];
        out.gather.num_receivers = static_cast<int>(config.receivers.size());
        out.gather.nt = config.nt;
        out.gather.shot_index = static_cast<int>(shot);
        out.gather.traces.assign(static_cast<std::size_t>(out.gather.num_receivers) * config.nt, 0.0f);

        std::vector<double> prev(np, 0.0), cur(np, 0.0), next(np, 0.0), lap(np, 0.0);
        for (int n = 0; n < config.nt; ++n) {
            for (std::size_t k = 0; k < config.receivers.size(); ++k) {
                const auto& rp = config.receivers[k];
                out.gather.traces[k * config.nt + n] = static_cast<float>(cur[idx(rp.row + off, rp.col + off)]);
            }
            if (config.snapshot_every > 0 && n % config.snapshot_every == 0) {
                std::vector<float> frame(static_cast<std::size_t>(height) * width);
                for (int r = 0; r < height; ++r)
                    for (int c = 0; c < width; ++c)
                        frame[static_cast<std::size_t>(r) * width + c] = static_cast<float>(cur[idx(r + off, c + off)]);
                out.snapshots.push_back(std::move(frame));
            }

            for (int r = kHalo; r < hp - kHalo; ++r) {
                const double* p = cur.data() + idx(r, 0);
                double* l = lap.data() + idx(r, 0);
                for (int c = kHalo; c < wp - kHalo; ++c) {
                    double acc = 2.0 * kC0 * p[c];
                    for (int k = 0; k < 4; ++k)
                        acc += kC[k] * (p[c + k + 1] + p[c - k - 1] + p[c + (k + 1) * wp] + p[c - (k + 1) * wp]);
                    l[c] = acc * inv_dx2;
                }
            }
            const double amp = config.density * config.source_amplitude * wavelet[n];
            if (amp != 0.0)
                for (const auto& [cell, weight] : src_cells) lap[cell] += amp * weight;
            for (int r = kHalo; r < hp - kHalo; ++r)
                for (int c = kHalo; c < wp - kHalo; ++c) {
                    const std::size_t i = idx(r, c);
                    next[i] = damp_new[i] * (2.0 * cur[i] - damp_old[i] * prev[i] + vdt2[i] * lap[i]);
                }
            std::swap(prev, cur);
            std::swap(cur, next);

            if ((n + 1) % 50 == 0 || n + 1 == config.nt) {
                bool finite = true;
                for (double v : cur)
                    if (!std::isfinite(v)) {
                        finite = false;
                        break;
                    }
                if (!finite)
                    throw SimulationError("non-finite wavefield at step " + std::to_string(n + 1) + " of shot " +
                                          std::to_string(shot));
            }
        }
      } catch (...) {
        failures[shot] = std::current_exception();
      }
    }
    for (const auto& f : failures)
        if (f) std::rethrow_exception(f);
    return results;
}

std::filesystem::path gather_path(const std::filesystem::path& dir, int scenario_id) {
    return dir / ("gathers_" + std::to_string(scenario_id) + ".f32");
}

void write_sim_meta(const std::filesystem::path& file, const SimConfig& config, int maps, const std::string& kind,
                    int id) {
    io::Meta m;
    m.put("gathers.kind", kind);
    m.put("gathers.id", id);
    m.put("gathers.maps", maps);
    m.put("gathers.shots", config.sources.size());
    m.put("gathers.receivers", config.receivers.size());
    m.put("gathers.nt", config.nt);
    m.put("gathers.layout", "map,shot,receiver,step");
    m.put("gathers.dtype", "f32le");
    m.put("sim.dx", io::format_double(config.dx));
    m.put("sim.dt", io::format_double(config.dt));
    m.put("sim.peak_frequency", io::format_double(config.peak_frequency));
    m.put("sim.boundary_width", config.boundary_width);
    m.put("sim.density", io::format_double(config.density));
    m.put("sim.cfl_coeff", io::format_double(config.cfl_coeff));
    m.put("sim.source_amplitude", io::format_double(config.source_amplitude));
    m.put("sim.source_radius", io::format_double(config.source_radius));
    m.put("sim.sponge_reflection", io::format_double(config.sponge_reflection));
    m.put("sim.sources", pos_list(config.sources));
    m.put("sim.receivers", pos_list(config.receivers));
    io::write_meta(file, m);
}

SimConfig read_sim_meta(const std::filesystem::path& file) {
    const auto m = io::read_meta(file);
    SimConfig c;
    c.dx = m.get<double>("sim.dx");
    c.dt = m.get<double>("sim.dt");
    c.nt = m.get<int>("gathers.nt");
    c.peak_frequency = m.get<double>("sim.peak_frequency");
    c.boundary_width = m.get<int>("sim.boundary_width");
    c.density = m.get<double>("sim.density");
    c.cfl_coeff = m.get<double>("sim.cfl_coeff");
    c.source_amplitude = m.get<double>("sim.source_amplitude");
    c.source_radius = m.get<double>("sim.source_radius");
    c.sponge_reflection = m.get<double>("sim.sponge_reflection");
    c.sources = parse_pos_list(m.get<std::string>("sim.sources"));
    c.receivers = parse_pos_list(m.get<std::string>("sim.receivers"));
    return c;
}

GatherSet simulate_maps(std::span<const std::vector<float>> maps, int height, int width, const SimConfig& config,
                        const std::string& context) {
    GatherSet g;
    g.maps = static_cast<int>(maps.size());
    g.shots = static_cast<int>(config.sources.size());
    g.receivers = static_cast<int>(config.receivers.size());
    g.nt = config.nt;
    const std::size_t per_map = static_cast<std::size_t>(g.shots) * g.receivers * g.nt;
    g.values.resize(per_map * maps.size());
    for (std::size_t m = 0; m < maps.size(); ++m) {
        std::vector<ShotResult> shots;
        try {
            shots = propagate(height, width, maps[m], config);
        } catch (const std::exception& e) {
            throw SimulationError(context + ", map " + std::to_string(m) + ": " + e.what());
        }
        for (int s = 0; s < g.shots; ++s)
            std::copy(shots[s].gather.traces.begin(), shots[s].gather.traces.end(),
                      g.values.begin() + m * per_map + static_cast<std::size_t>(s) * g.receivers * g.nt);
    }
    return g;
}

void save_gathers(const std::filesystem::path& file, const GatherSet& g, const SimConfig& config,
                  const std::string& kind, int id) {
    io::write_f32(file, g.values);
    auto sidecar = file;
    write_sim_meta(sidecar.replace_extension(".meta"), config, g.maps, kind, id);
}

GatherSet load_gathers(const std::filesystem::path& file) {
    auto sidecar = file;
    const auto m = io::read_meta(sidecar.replace_extension(".meta"));
    GatherSet g;
    g.maps = m.get<int>("gathers.maps");
    g.shots = m.get<int>("gathers.shots");
    g.receivers = m.get<int>("gathers.receivers");
    g.nt = m.get<int>("gathers.nt");
    g.values = io::read_f32(file);
    if (g.values.size() != static_cast<std::size_t>(g.maps) * g.shots * g.receivers * g.nt)
        throw std::runtime_error("gather file " + file.string() + " does not match its sidecar");
    return g;
}

void forward_dataset(const std::filesystem::path& data_dir, const std::filesystem::path& out_dir,
                     const SimConfig& config) {
    std::filesystem::create_directories(out_dir);
    for (int id : datagen::list_scenarios(data_dir)) {
        const auto s = datagen::load_scenario(data_dir, id);
        std::vector<std::vector<float>> maps;
        for (const auto& m : s.maps) maps.push_back(m.grid);
        GatherSet g;
        try {
            g = simulate_maps(maps, s.maps.front().height, s.maps.front().width, config, "scenario " + std::to_string(id));
        } catch (const SimulationError& e) {
            // Translate the map index into a year for the error message.
            std::string msg = e.what();
            const auto pos = msg.find(", map ");
            if (pos != std::string::npos) {
                const int m = std::stoi(msg.substr(pos + 6));
                msg.replace(pos, msg.find(':', pos) - pos, ", year " + std::to_string(datagen::year_at(m)));
            }
            throw SimulationError(msg);
        }
        save_gathers(gather_path(out_dir, id), g, config, "scenario", id);
    }
}

}  // namespace seismo::wavesim
