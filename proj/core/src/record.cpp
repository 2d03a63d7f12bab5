#include "semac/record.hpp"

#include <stdexcept>
#include <string>

namespace semac {

std::string_view to_string(Protocol p) {
    switch (p) {
    case Protocol::SAloha: return "saloha";
    case Protocol::NpmFrozen: return "npm-frozen";
    case Protocol::Npm: return "npm";
    case Protocol::Tpm: return "tpm";
    case Protocol::T2npm: return "t2npm";
    case Protocol::T3npm: return "t3npm";
    }
    return "unknown";
}

Protocol protocol_from_string(std::string_view name) {
    for (Protocol p : {Protocol::SAloha, Protocol::NpmFrozen, Protocol::Npm, Protocol::Tpm, Protocol::T2npm,
                       Protocol::T3npm})
        if (to_string(p) == name) return p;
    throw std::invalid_argument("unknown protocol '" + std::string(name) + "'");
}

std::vector<double> RunSeries::goodputs() const {
    std::vector<double> g;
    g.reserve(rows.size());
    for (const auto& r : rows) g.push_back(r.goodput);
    return g;
}

} // namespace semac
