#include "zoomlab/trajectory.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace zoomlab {

void Trajectory::reserve(int64_t steps_hint) {
    x.reserve(static_cast<size_t>((steps_hint + 1) * dim));
    u.reserve(static_cast<size_t>(steps_hint * dim));
    q.reserve(static_cast<size_t>(steps_hint));
    qprime.reserve(static_cast<size_t>(steps_hint));
    enc_grid.reserve(static_cast<size_t>(steps_hint + 1));
    dec_grid.reserve(static_cast<size_t>(steps_hint + 1));
    overflow.reserve(static_cast<size_t>(steps_hint));
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open trajectory file for writing: " + path);
    out << "# seed=" << traj.seed << " config_hash=" << traj.config_hash
        << " dim=" << traj.dim << " delta0=" << traj.delta0
        << " grid_step=" << traj.grid_step << " levels=" << traj.levels << "\n";
    out << "t";
    for (int i = 0; i < traj.dim; ++i) out << ",x" << (i + 1);
    for (int i = 0; i < traj.dim; ++i) out << ",u" << (i + 1);
    out << ",q,qprime,enc_g,dec_g,overflow\n";

    const int64_t n = traj.steps();
    char buf[64];
    const bool codec = traj.has_codec();
    for (int64_t t = 0; t <= n; ++t) {
        out << t;
        for (int i = 0; i < traj.dim; ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", traj.x[static_cast<size_t>(t * traj.dim + i)]);
            out << ',' << buf;
        }
        if (t < n) {
            for (int i = 0; i < traj.dim; ++i) {
                std::snprintf(buf, sizeof buf, "%.17g", traj.u[static_cast<size_t>(t * traj.dim + i)]);
                out << ',' << buf;
            }
            if (codec)
                out << ',' << traj.q[static_cast<size_t>(t)] << ','
                    << traj.qprime[static_cast<size_t>(t)] << ','
                    << traj.enc_grid[static_cast<size_t>(t)] << ','
                    << traj.dec_grid[static_cast<size_t>(t)] << ','
                    << static_cast<int>(traj.overflow[static_cast<size_t>(t)]);
            else
                out << ",,,,,";
        } else {
            // terminal state row: no control or symbols
            for (int i = 0; i < traj.dim; ++i) out << ',';
            if (codec)
                out << ",,," << traj.enc_grid[static_cast<size_t>(t)] << ','
                    << traj.dec_grid[static_cast<size_t>(t)] << ',';
            else
                out << ",,,,,";
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed for trajectory file: " + path);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

Trajectory read_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trajectory file: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("# seed=", 0) != 0)
        throw ProtocolError("trajectory file missing metadata header: " + path);

    Trajectory traj;
    {
        std::istringstream meta(line.substr(1));
        std::string kv;
        while (meta >> kv) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
            if (key == "seed") traj.seed = std::stoull(val);
            else if (key == "config_hash") traj.config_hash = std::stoull(val);
            else if (key == "dim") traj.dim = std::stoi(val);
            else if (key == "delta0") traj.delta0 = std::stod(val);
            else if (key == "grid_step") traj.grid_step = std::stod(val);
            else if (key == "levels") traj.levels = std::stoi(val);
        }
    }
    if (!std::getline(in, line)) throw ProtocolError("trajectory file truncated: " + path);

    const size_t ncols = 1 + 2 * static_cast<size_t>(traj.dim) + 5;
    int64_t expected_t = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != ncols)
            throw ProtocolError("trajectory row has " + std::to_string(f.size()) +
                                " fields, expected " + std::to_string(ncols) + ": " + path);
        if (std::stoll(f[0]) != expected_t)
            throw ProtocolError("trajectory rows out of order: " + path);
        ++expected_t;
        size_t col = 1;
        for (int i = 0; i < traj.dim; ++i) traj.x.push_back(std::stod(f[col++]));
        const bool terminal = f[col].empty();
        if (!terminal) {
            for (int i = 0; i < traj.dim; ++i) traj.u.push_back(std::stod(f[col++]));
            if (!f[col].empty()) {
                traj.q.push_back(static_cast<int32_t>(std::stol(f[col])));
                traj.qprime.push_back(static_cast<int32_t>(std::stol(f[col + 1])));
                traj.enc_grid.push_back(static_cast<int32_t>(std::stol(f[col + 2])));
                traj.dec_grid.push_back(static_cast<int32_t>(std::stol(f[col + 3])));
                traj.overflow.push_back(static_cast<uint8_t>(std::stol(f[col + 4])));
            }
        } else if (traj.has_codec()) {
            col += static_cast<size_t>(traj.dim);  // empty control fields
            traj.enc_grid.push_back(static_cast<int32_t>(std::stol(f[col + 2])));
            traj.dec_grid.push_back(static_cast<int32_t>(std::stol(f[col + 3])));
        }
    }
    if (traj.x.size() != static_cast<size_t>(traj.steps() + 1) * traj.dim)
        throw ProtocolError("trajectory state/control lengths inconsistent: " + path);
    return traj;
}

}  // namespace zoomlab
