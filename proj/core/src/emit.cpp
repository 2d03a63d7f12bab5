#include "semac/emit.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace semac {

using nlohmann::ordered_json;

std::string format_number(double v) {
    // Shortest text that parses back to the same double.
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

namespace {

// Numbers go through format_number so JSON and CSV agree digit for digit.
ordered_json num(double v) { return ordered_json::parse(format_number(v)); }

ordered_json opt_int(const std::optional<int>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

std::string episode_csv(const RunSeries& series) {
    std::string out = "episode,protocol,goodput,loss,epsilon,switched\n";
    for (const auto& r : series.rows) {
        out += std::to_string(r.episode) + "," + r.protocol + "," + format_number(r.goodput) + ",";
        if (r.loss) out += format_number(*r.loss);
        out += ",";
        if (r.epsilon) out += format_number(*r.epsilon);
        out += r.switched ? ",1\n" : ",0\n";
    }
    return out;
}

RunSeries parse_episode_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || split(line, ',') != std::vector<std::string>{"episode", "protocol", "goodput", "loss",
                                                                                 "epsilon", "switched"})
        throw std::invalid_argument("episode csv: unexpected header");
    RunSeries s;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto f = split(line, ',');
        if (f.size() != 6) throw std::invalid_argument("episode csv: line " + std::to_string(lineno) + " has " +
                                                       std::to_string(f.size()) + " fields");
        try {
            EpisodeRecord r;
            r.episode = std::stoi(f[0]);
            r.protocol = f[1];
            r.goodput = std::stod(f[2]);
            if (!f[3].empty()) r.loss = std::stod(f[3]);
            if (!f[4].empty()) r.epsilon = std::stod(f[4]);
            r.switched = f[5] == "1";
            if (r.switched && !s.switch_episode) s.switch_episode = r.episode;
            s.rows.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw std::invalid_argument("episode csv: bad number on line " + std::to_string(lineno));
        }
    }
    if (!s.rows.empty()) {
        try {
            s.protocol = protocol_from_string(s.rows.back().protocol);
        } catch (const std::invalid_argument&) {
        }
    }
    return s;
}

RunSeries read_episode_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_episode_csv(ss.str());
}

std::string training_csv(const RunSeries& series) {
    std::string out = "episode,step,loss,epsilon,goodput\n";
    for (const auto& r : series.rows) {
        const std::string eps = r.epsilon ? format_number(*r.epsilon) : "";
        for (std::size_t i = 0; i < r.step_losses.size(); ++i)
            out += std::to_string(r.episode) + "," + std::to_string(i) + "," + format_number(r.step_losses[i]) + "," +
                   eps + "," + format_number(r.goodput) + "\n";
    }
    return out;
}

std::string curve_csv(const std::vector<std::pair<double, double>>& curve) {
    std::string out = "ghat,R\n";
    for (const auto& [g, r] : curve) out += format_number(g) + "," + format_number(r) + "\n";
    return out;
}

std::string summary_json(const ProtocolRun& run) {
    const auto g = run.series.goodputs();
    ordered_json j;
    j["protocol"] = std::string(to_string(run.series.protocol));
    j["seed"] = run.series.seed;
    j["episodes"] = run.series.rows.size();
    j["mean_goodput"] = g.empty() ? ordered_json(nullptr) : num(mean(g));
    j["meta_resilience"] = num(run.meta_resilience);
    j["switch_episode"] = opt_int(run.series.switch_episode);
    if (!run.series.v_tpm.empty()) j["v_tpm_mean"] = num(mean(run.series.v_tpm));
    if (run.cache) j["teacher_cache_entries"] = run.cache->size();
    return j.dump(2) + "\n";
}

std::string aggregate_json(const std::vector<ProtocolRun>& runs) {
    ordered_json j;
    if (!runs.empty()) j["protocol"] = std::string(to_string(runs.front().series.protocol));
    ordered_json per = ordered_json::array();
    std::vector<double> mr, mg;
    for (const auto& r : runs) {
        const double g = mean(r.series.goodputs());
        per.push_back({{"seed", r.series.seed},
                       {"meta_resilience", num(r.meta_resilience)},
                       {"mean_goodput", num(g)},
                       {"switch_episode", opt_int(r.series.switch_episode)}});
        mr.push_back(r.meta_resilience);
        mg.push_back(g);
    }
    j["seeds"] = per;
    if (!runs.empty()) {
        j["meta_resilience"] = num(mean(mr));
        j["mean_goodput"] = num(mean(mg));
    }
    return j.dump(2) + "\n";
}

std::string sweep_csv(const SweepResult& r) {
    std::string out = "T_M,seed,switch_episode,meta_resilience\n";
    for (const auto& row : r.rows)
        out += std::to_string(row.t_m) + "," + std::to_string(row.seed) + "," +
               (row.switch_episode ? std::to_string(*row.switch_episode) : "") + "," +
               format_number(row.meta_resilience) + "\n";
    return out;
}

std::string sweep_json(const SweepResult& r) {
    ordered_json j;
    ordered_json by = ordered_json::array();
    for (const auto& [tm, m] : r.mean_by_tm) by.push_back({{"T_M", tm}, {"meta_resilience", num(m)}});
    j["mean_by_tm"] = by;
    j["argmax_tm"] = r.argmax_tm;
    j["tpm_only"] = num(r.tpm_only_mean);
    j["t2npm_only"] = num(r.t2npm_only_mean);
    j["reduces_to_tpm"] = r.reduces_to_tpm;
    j["reduces_to_t2npm"] = r.reduces_to_t2npm;
    return j.dump(2) + "\n";
}

std::string table1_csv(const std::vector<Table1Column>& cols) {
    std::string out = "column,seed,frozen,retrained,saloha\n";
    for (const auto& c : cols)
        for (std::size_t s = 0; s < c.seeds.size(); ++s)
            out += c.name + "," + std::to_string(c.seeds[s]) + "," + format_number(c.frozen[s]) + "," +
                   format_number(c.retrained[s]) + "," + format_number(c.saloha[s]) + "\n";
    return out;
}

std::string table1_json(const std::vector<Table1Column>& cols) {
    ordered_json j = ordered_json::array();
    for (const auto& c : cols)
        j.push_back({{"column", c.name},
                     {"frozen", num(c.frozen_mean())},
                     {"retrained", num(c.retrained_mean())},
                     {"saloha", num(c.saloha_mean())},
                     {"gain", num(c.retrained_mean() - c.frozen_mean())}});
    return j.dump(2) + "\n";
}

std::string line_plot_svg(const std::vector<PlotLine>& lines, const std::string& x_label, const std::string& y_label) {
    constexpr double W = 640, H = 400, ml = 60, mr = 140, mt = 20, mb = 50;
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    bool first = true;
    for (const auto& l : lines)
        for (const auto& [x, y] : l.points) {
            if (first) {
                x0 = x1 = x;
                y0 = std::min(0.0, y);
                y1 = y;
                first = false;
            }
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * (W - ml - mr); };
    auto py = [&](double y) { return H - mb - (y - y0) / (y1 - y0) * (H - mt - mb); };
    static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\"" << H - mb
      << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << ml << "\" y=\"" << H - mb + 15 << "\" font-size=\"11\">" << format_number(x0) << "</text>\n";
    o << "<text x=\"" << W - mr << "\" y=\"" << H - mb + 15 << "\" font-size=\"11\" text-anchor=\"end\">"
      << format_number(x1) << "</text>\n";
    o << "<text x=\"" << ml - 5 << "\" y=\"" << H - mb << "\" font-size=\"11\" text-anchor=\"end\">" << format_number(y0)
      << "</text>\n";
    o << "<text x=\"" << ml - 5 << "\" y=\"" << mt + 10 << "\" font-size=\"11\" text-anchor=\"end\">"
      << format_number(y1) << "</text>\n";
    o << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 10 << "\" font-size=\"12\" text-anchor=\"middle\">"
      << x_label << "</text>\n";
    o << "<text x=\"15\" y=\"" << (mt + H - mb) / 2 << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
      << (mt + H - mb) / 2 << ")\">" << y_label << "</text>\n";
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const char* c = colours[i % 7];
        o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : lines[i].points) o << format_number(px(x)) << "," << format_number(py(y)) << " ";
        o << "\"/>\n";
        o << "<text x=\"" << W - mr + 10 << "\" y=\"" << mt + 15 * (i + 1) << "\" font-size=\"11\" fill=\"" << c << "\">"
          << lines[i].label << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    const std::filesystem::path p(path);
    std::error_code ec;
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

} // namespace semac
