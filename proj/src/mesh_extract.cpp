#include "curvsdf/mesh_extract.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "mc_tables.inl"

namespace curvsdf {

void ScalarField::validate() const {
    if (nx < 2 || ny < 2 || nz < 2) throw std::invalid_argument("ScalarField: need at least 2 nodes per axis");
    if (!(lo.x() < hi.x() && lo.y() < hi.y() && lo.z() < hi.z()))
        throw std::invalid_argument("ScalarField: empty bounds");
    size_t n = static_cast<size_t>(nx) * ny * nz;
    if (psi.size() != n || w.size() != n) throw std::invalid_argument("ScalarField: node array size mismatch");
    for (size_t i = 0; i < n; ++i)
        if (!std::isfinite(psi[i]) || !std::isfinite(w[i]))
            throw std::invalid_argument("ScalarField: non-finite node value");
}

ScalarField evaluate_field(const NeuralField& net, const Vec3& lo, const Vec3& hi, int nx, int ny, int nz) {
    ScalarField field;
    field.lo = lo;
    field.hi = hi;
    field.nx = nx;
    field.ny = ny;
    field.nz = nz;
    if (nx < 2 || ny < 2 || nz < 2) throw std::invalid_argument("evaluate_field: need at least 2 nodes per axis");
    if (!(lo.x() < hi.x() && lo.y() < hi.y() && lo.z() < hi.z()))
        throw std::invalid_argument("evaluate_field: empty bounds");

    size_t total = static_cast<size_t>(nx) * ny * nz;
    field.psi.resize(total);
    field.w.resize(total);

    const size_t chunk = 65536;
    std::vector<size_t> flat;  // node order within the chunk
    flat.reserve(chunk);
    Eigen::Matrix3Xd pts(3, static_cast<Eigen::Index>(chunk));
    Eigen::VectorXd psi, unc;

    auto flush = [&]() {
        if (flat.empty()) return;
        Eigen::Matrix3Xd block = pts.leftCols(static_cast<Eigen::Index>(flat.size()));
        forward(net, block, psi, unc);
        for (size_t q = 0; q < flat.size(); ++q) {
            double p = psi(static_cast<Eigen::Index>(q));
            double u = unc(static_cast<Eigen::Index>(q));
            if (!std::isfinite(p) || !std::isfinite(u)) {
                size_t n = flat[q];
                int i = static_cast<int>(n % nx);
                int j = static_cast<int>((n / nx) % ny);
                int k = static_cast<int>(n / (static_cast<size_t>(nx) * ny));
                std::ostringstream msg;
                msg << "evaluate_field: non-finite output at node (" << i << "," << j << "," << k << ")";
                throw std::runtime_error(msg.str());
            }
            field.psi[flat[q]] = p;
            field.w[flat[q]] = u;
        }
        flat.clear();
    };

    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                pts.col(static_cast<Eigen::Index>(flat.size())) = field.position(i, j, k);
                flat.push_back(field.node(i, j, k));
                if (flat.size() == chunk) flush();
            }
    flush();
    return field;
}

namespace {

// cube corner offsets, matching the ordering the lookup tables assume
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdgeEnds[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                  {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

}  // namespace

UncertainMesh marching_cubes_uncertain(const ScalarField& field, double tau) {
    field.validate();
    if (tau < 0 || tau >= 1) throw std::invalid_argument("marching_cubes_uncertain: tau must be in [0,1)");

    UncertainMesh mesh;
    std::unordered_map<uint64_t, int> edge_vertex;  // canonical lattice edge -> vertex index

    // resolve an edge crossing to a shared, deterministically placed vertex;
    // the edge is canonicalized by node index so both adjacent cubes agree
    auto vertex_on_edge = [&](size_t na, size_t nb, Vec3 pa, Vec3 pb, double va, double vb, double wa, double wb) {
        if (na > nb) {
            std::swap(na, nb);
            std::swap(pa, pb);
            std::swap(va, vb);
            std::swap(wa, wb);
        }
        uint64_t key = static_cast<uint64_t>(na) * static_cast<uint64_t>(field.psi.size()) + nb;
        auto it = edge_vertex.find(key);
        if (it != edge_vertex.end()) return it->second;
        double t = (std::abs(vb - va) < 1e-300) ? 0.5 : (0.0 - va) / (vb - va);
        t = std::clamp(t, 0.0, 1.0);
        int idx = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(pa + t * (pb - pa));
        mesh.uncertainty.push_back(wa + t * (wb - wa));
        edge_vertex.emplace(key, idx);
        return idx;
    };

    double vals[8], ws[8];
    size_t nodes[8];
    Vec3 pos[8];
    for (int k = 0; k + 1 < field.nz; ++k) {
        for (int j = 0; j + 1 < field.ny; ++j) {
            for (int i = 0; i + 1 < field.nx; ++i) {
                int cubeindex = 0;
                for (int c = 0; c < 8; ++c) {
                    int ci = i + kCorner[c][0], cj = j + kCorner[c][1], ck = k + kCorner[c][2];
                    nodes[c] = field.node(ci, cj, ck);
                    vals[c] = field.psi[nodes[c]];
                    ws[c] = field.w[nodes[c]];
                    pos[c] = field.position(ci, cj, ck);
                    if (vals[c] < 0) cubeindex |= 1 << c;
                }
                if (kEdgeTable[cubeindex] == 0) continue;

                const int* tri = kTriTable[cubeindex];
                for (int t = 0; tri[t] != -1; t += 3) {
                    bool valid = true;
                    for (int e = 0; e < 3 && valid; ++e) {
                        int a = kEdgeEnds[tri[t + e]][0], b = kEdgeEnds[tri[t + e]][1];
                        if (ws[a] <= tau || ws[b] <= tau) valid = false;
                    }
                    if (!valid) continue;

                    int v[3];
                    for (int e = 0; e < 3; ++e) {
                        int a = kEdgeEnds[tri[t + e]][0], b = kEdgeEnds[tri[t + e]][1];
                        v[e] = vertex_on_edge(nodes[a], nodes[b], pos[a], pos[b], vals[a], vals[b], ws[a], ws[b]);
                    }
                    // keep zero-area slivers: dropping them would leave their
                    // neighbors with unmatched edges and break watertightness
                    mesh.triangles.emplace_back(v[0], v[1], v[2]);
                }
            }
        }
    }

    // drop vertices no surviving triangle references
    std::vector<int> remap(mesh.vertices.size(), -1);
    UncertainMesh out;
    for (auto& tri : mesh.triangles) {
        Eigen::Vector3i mapped;
        for (int e = 0; e < 3; ++e) {
            int& r = remap[tri(e)];
            if (r < 0) {
                r = static_cast<int>(out.vertices.size());
                out.vertices.push_back(mesh.vertices[tri(e)]);
                out.uncertainty.push_back(mesh.uncertainty[tri(e)]);
            }
            mapped(e) = r;
        }
        out.triangles.push_back(mapped);
    }
    return out;
}

void save_mesh_ply(const UncertainMesh& mesh, const std::string& path, bool binary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n";
    out << "element vertex " << mesh.vertices.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\nproperty double quality\n";
    out << "element face " << mesh.triangles.size() << "\n";
    out << "property list uchar int vertex_indices\nend_header\n";
    if (binary) {
        for (size_t i = 0; i < mesh.vertices.size(); ++i) {
            double row[4] = {mesh.vertices[i].x(), mesh.vertices[i].y(), mesh.vertices[i].z(), mesh.uncertainty[i]};
            out.write(reinterpret_cast<const char*>(row), sizeof(row));
        }
        for (const auto& t : mesh.triangles) {
            uint8_t n = 3;
            int32_t idx[3] = {t.x(), t.y(), t.z()};
            out.write(reinterpret_cast<const char*>(&n), 1);
            out.write(reinterpret_cast<const char*>(idx), sizeof(idx));
        }
    } else {
        out.precision(17);
        for (size_t i = 0; i < mesh.vertices.size(); ++i)
            out << mesh.vertices[i].x() << " " << mesh.vertices[i].y() << " " << mesh.vertices[i].z() << " "
                << mesh.uncertainty[i] << "\n";
        for (const auto& t : mesh.triangles) out << "3 " << t.x() << " " << t.y() << " " << t.z() << "\n";
    }
}

void save_mesh_obj(const UncertainMesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(17);
    for (const auto& v : mesh.vertices) out << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";
    for (const auto& t : mesh.triangles) out << "f " << t.x() + 1 << " " << t.y() + 1 << " " << t.z() + 1 << "\n";
}

UncertainMesh load_mesh_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "ply") throw std::runtime_error("not a PLY file: " + path);

    bool binary = false;
    size_t n_vert = 0, n_face = 0;
    struct Prop {
        std::string type, name;
    };
    std::vector<Prop> vprops;
    std::string element;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "binary_little_endian") binary = true;
            else if (fmt != "ascii") throw std::runtime_error("unsupported PLY format: " + fmt);
        } else if (tok == "element") {
            ls >> element;
            size_t n;
            ls >> n;
            if (element == "vertex") n_vert = n;
            else if (element == "face") n_face = n;
        } else if (tok == "property" && element == "vertex") {
            Prop p;
            ls >> p.type;
            if (p.type == "list") throw std::runtime_error("unsupported list property on vertices");
            ls >> p.name;
            vprops.push_back(p);
        } else if (tok == "end_header") {
            break;
        }
    }

    auto scalar_size = [](const std::string& t) -> size_t {
        if (t == "double" || t == "float64") return 8;
        if (t == "float" || t == "float32") return 4;
        if (t == "int" || t == "uint" || t == "int32" || t == "uint32") return 4;
        if (t == "uchar" || t == "char" || t == "uint8" || t == "int8") return 1;
        if (t == "short" || t == "ushort") return 2;
        throw std::runtime_error("unsupported PLY scalar type: " + t);
    };

    UncertainMesh mesh;
    mesh.vertices.reserve(n_vert);
    mesh.uncertainty.assign(n_vert, 0.0);
    for (size_t i = 0; i < n_vert; ++i) {
        Vec3 v = Vec3::Zero();
        double q = 0;
        if (binary) {
            for (const auto& p : vprops) {
                size_t sz = scalar_size(p.type);
                char buf[8];
                in.read(buf, static_cast<std::streamsize>(sz));
                double val = 0;
                if (sz == 8) std::memcpy(&val, buf, 8);
                else if (p.type == "float" || p.type == "float32") {
                    float f;
                    std::memcpy(&f, buf, 4);
                    val = f;
                }
                if (p.name == "x") v.x() = val;
                else if (p.name == "y") v.y() = val;
                else if (p.name == "z") v.z() = val;
                else if (p.name == "quality") q = val;
            }
        } else {
            std::getline(in, line);
            std::istringstream ls(line);
            for (const auto& p : vprops) {
                double val;
                ls >> val;
                if (p.name == "x") v.x() = val;
                else if (p.name == "y") v.y() = val;
                else if (p.name == "z") v.z() = val;
                else if (p.name == "quality") q = val;
            }
        }
        if (!in) throw std::runtime_error("truncated PLY vertex data: " + path);
        mesh.vertices.push_back(v);
        mesh.uncertainty[i] = q;
    }
    for (size_t i = 0; i < n_face; ++i) {
        int idx[3];
        if (binary) {
            uint8_t n;
            in.read(reinterpret_cast<char*>(&n), 1);
            if (n != 3) throw std::runtime_error("non-triangle face in PLY: " + path);
            int32_t raw[3];
            in.read(reinterpret_cast<char*>(raw), sizeof(raw));
            idx[0] = raw[0];
            idx[1] = raw[1];
            idx[2] = raw[2];
        } else {
            std::getline(in, line);
            std::istringstream ls(line);
            int n;
            ls >> n;
            if (n != 3) throw std::runtime_error("non-triangle face in PLY: " + path);
            ls >> idx[0] >> idx[1] >> idx[2];
        }
        if (!in) throw std::runtime_error("truncated PLY face data: " + path);
        for (int e = 0; e < 3; ++e)
            if (idx[e] < 0 || static_cast<size_t>(idx[e]) >= n_vert)
                throw std::runtime_error("PLY face index out of range: " + path);
        mesh.triangles.emplace_back(idx[0], idx[1], idx[2]);
    }
    return mesh;
}

}  // namespace curvsdf
