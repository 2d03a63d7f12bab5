// Checkpoint layout (text, one token stream):
//
//   semac-npm 1
//   shape <ucm_dim> <dcm_dim> <activation> <ue_obs_cap> <n_hidden> <h_1> ... <h_k>
//   num_ues <L>
//   then for every network in order uplink_1..uplink_L, coordinator, head_1..head_L:
//     net <name> <n_layers>
//     per layer: layer <out> <in>, then out*in weights row-major, then out biases
//
// Numbers are written as C99 hex floats so a load reproduces every bit.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "semac/npm.hpp"

namespace semac {
namespace {

constexpr int kCheckpointVersion = 1;

std::string hex(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double parse_double(const std::string& tok) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw std::runtime_error("checkpoint: bad number '" + tok + "'");
    return v;
}

void expect(std::istream& in, const std::string& word) {
    std::string tok;
    if (!(in >> tok) || tok != word)
        throw std::runtime_error("checkpoint: expected '" + word + "', got '" + tok + "'");
}

int read_int(std::istream& in) {
    long v = 0;
    if (!(in >> v)) throw std::runtime_error("checkpoint: expected integer");
    return static_cast<int>(v);
}

void write_mlp(std::ostream& out, const std::string& name, const Mlp& m) {
    out << "net " << name << ' ' << m.layers.size() << '\n';
    for (const auto& l : m.layers) {
        out << "layer " << l.weight.rows() << ' ' << l.weight.cols() << '\n';
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out << (c ? " " : "") << hex(l.weight(r, c));
            out << '\n';
        }
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) out << (r ? " " : "") << hex(l.bias(r));
        out << '\n';
    }
}

Mlp read_mlp(std::istream& in, const std::string& name) {
    expect(in, "net");
    expect(in, name);
    const int n_layers = read_int(in);
    if (n_layers < 1) throw std::runtime_error("checkpoint: network without layers");
    Mlp m;
    std::string tok;
    for (int k = 0; k < n_layers; ++k) {
        expect(in, "layer");
        const int rows = read_int(in);
        const int cols = read_int(in);
        if (rows < 1 || cols < 1) throw std::runtime_error("checkpoint: bad layer size");
        DenseLayer l{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) {
                if (!(in >> tok)) throw std::runtime_error("checkpoint: truncated weights");
                l.weight(r, c) = parse_double(tok);
            }
        for (int r = 0; r < rows; ++r) {
            if (!(in >> tok)) throw std::runtime_error("checkpoint: truncated biases");
            l.bias(r) = parse_double(tok);
        }
        m.layers.push_back(std::move(l));
    }
    return m;
}

} // namespace

void save_checkpoint(const NpmParams& params, std::ostream& out) {
    params.check_consistent();
    const auto& sh = params.shape;
    out << "semac-npm " << kCheckpointVersion << '\n';
    out << "shape " << sh.ucm_dim << ' ' << sh.dcm_dim << ' ' << (sh.activation == Activation::Tanh ? "tanh" : "relu")
        << ' ' << sh.ue_obs_cap << ' ' << sh.hidden.size();
    for (int h : sh.hidden) out << ' ' << h;
    out << '\n' << "num_ues " << params.num_ues << '\n';
    for (int ue = 0; ue < params.num_ues; ++ue)
        write_mlp(out, "uplink_" + std::to_string(ue + 1), params.uplink[static_cast<std::size_t>(ue)]);
    write_mlp(out, "coordinator", params.coordinator);
    for (int ue = 0; ue < params.num_ues; ++ue)
        write_mlp(out, "head_" + std::to_string(ue + 1), params.heads[static_cast<std::size_t>(ue)]);
}

NpmParams load_checkpoint(std::istream& in) {
    expect(in, "semac-npm");
    const int version = read_int(in);
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    NpmParams p;
    expect(in, "shape");
    p.shape.ucm_dim = read_int(in);
    p.shape.dcm_dim = read_int(in);
    std::string act;
    in >> act;
    if (act == "tanh")
        p.shape.activation = Activation::Tanh;
    else if (act == "relu")
        p.shape.activation = Activation::Relu;
    else
        throw std::runtime_error("checkpoint: unknown activation '" + act + "'");
    p.shape.ue_obs_cap = read_int(in);
    const int n_hidden = read_int(in);
    if (n_hidden < 0) throw std::runtime_error("checkpoint: bad hidden count");
    p.shape.hidden.clear();
    for (int i = 0; i < n_hidden; ++i) p.shape.hidden.push_back(read_int(in));
    expect(in, "num_ues");
    p.num_ues = read_int(in);
    if (p.num_ues < 1) throw std::runtime_error("checkpoint: bad num_ues");
    for (int ue = 0; ue < p.num_ues; ++ue) p.uplink.push_back(read_mlp(in, "uplink_" + std::to_string(ue + 1)));
    p.coordinator = read_mlp(in, "coordinator");
    for (int ue = 0; ue < p.num_ues; ++ue) p.heads.push_back(read_mlp(in, "head_" + std::to_string(ue + 1)));
    p.check_consistent();
    return p;
}

void save_checkpoint(const NpmParams& params, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    save_checkpoint(params, out);
    if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

NpmParams load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    return load_checkpoint(in);
}

} // namespace semac
