#include "higgs/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace higgs {

namespace {

static_assert(std::endian::native == std::endian::little, "snapshot payload assumes a little-endian host");

void ensure_parent(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

}  // namespace

void write_snapshot(const std::filesystem::path& path, const HiggsPair& p, double t,
                    const nlohmann::json& meta) {
    const std::size_t count = p.a2.data().size();
    const std::size_t bytes = count * sizeof(cplx);
    nlohmann::json h;
    h["format_version"] = kSnapshotFormat;
    h["N"] = p.grid().n();
    h["L"] = p.grid().length();
    h["r"] = p.rank();
    h["t"] = t;
    h["fixed_det"] = p.fixed_det;
    h["fields"] = nlohmann::json::array({
        {{"name", "a2"}, {"degree", to_string(p.a2.degree())}, {"offset", 0}, {"count", count}},
        {{"name", "phi"}, {"degree", to_string(p.phi.degree())}, {"offset", bytes}, {"count", count}},
    });
    h["payload_bytes"] = 2 * bytes;
    h["meta"] = meta;
    const std::string text = h.dump();
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_snapshot: cannot open " + path.string());
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), std::streamsize(text.size()));
    out.write(reinterpret_cast<const char*>(p.a2.data().data()), std::streamsize(bytes));
    out.write(reinterpret_cast<const char*>(p.phi.data().data()), std::streamsize(bytes));
    if (!out) throw std::runtime_error("write_snapshot: write failed for " + path.string());
}

SnapshotData read_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_snapshot: cannot open " + path.string());
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in || len == 0 || len > (1u << 24)) throw std::runtime_error("read_snapshot: bad header length");
    std::string text(len, '\0');
    in.read(text.data(), std::streamsize(len));
    SnapshotData out;
    out.header = nlohmann::json::parse(text);
    const auto& h = out.header;
    if (h.at("format_version").get<int>() != kSnapshotFormat)
        throw std::runtime_error("read_snapshot: unsupported format version");
    const TorusGrid grid(h.at("N").get<int>(), h.at("L").get<double>());
    const int r = h.at("r").get<int>();
    MatrixField a(grid, r, FormDegree::dzbar), phi(grid, r, FormDegree::dz);
    const std::size_t bytes = a.data().size() * sizeof(cplx);
    if (h.at("payload_bytes").get<std::size_t>() != 2 * bytes)
        throw std::runtime_error("read_snapshot: payload size does not match N and r");
    const std::streampos start = in.tellg();
    for (const auto& f : h.at("fields")) {
        MatrixField* dst = f.at("name") == "a2" ? &a : f.at("name") == "phi" ? &phi : nullptr;
        if (!dst) continue;
        in.seekg(start + std::streamoff(f.at("offset").get<std::size_t>()));
        in.read(reinterpret_cast<char*>(dst->data().data()), std::streamsize(bytes));
        if (!in) throw std::runtime_error("read_snapshot: truncated payload");
    }
    in.seekg(0, std::ios::end);
    if (std::size_t(in.tellg() - start) != 2 * bytes)
        throw std::runtime_error("read_snapshot: file length differs from header");
    out.pair = HiggsPair(std::move(a), std::move(phi), h.at("fixed_det").get<bool>());
    out.time = h.at("t").get<double>();
    return out;
}

std::string csv_header(int rank) {
    std::ostringstream os;
    os << "time,ymh,qh,grad_norm,sup_mu,higgs_residual";
    for (int k = 1; k <= rank; ++k) os << ",re_tr" << k << ",im_tr" << k;
    for (int k = 1; k <= rank; ++k) os << ",H" << k;
    return os.str();
}

std::string csv_row(const Observables& o) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << o.time << ',' << o.ymh << ',' << o.qh << ',' << o.grad_norm << ',' << o.sup_mu << ','
       << o.higgs_residual;
    for (const cplx& t : o.trace_powers) os << ',' << t.real() << ',' << t.imag();
    for (double h : o.convex) os << ',' << h;
    return os.str();
}

void write_csv(const std::filesystem::path& path, const std::vector<Observables>& rows, int rank) {
    ensure_parent(path);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_csv: cannot open " + path.string());
    out << csv_header(rank) << '\n';
    for (const auto& r : rows) out << csv_row(r) << '\n';
}

std::string config_hash(const std::string& canonical) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    ensure_parent(path);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_json: cannot open " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace higgs
