#include "curvsdf/depth_io.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace curvsdf {

namespace {

bool has_suffix(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && std::equal(suf.rbegin(), suf.rend(), s.rbegin());
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

Image<uint16_t> read_png16(const std::string& path) {
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png read error: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);
    if (bit_depth != 16 || color_type != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("unsupported PNG (need 16-bit grayscale): " + path);
    }
    png_set_swap(png);  // PNG is big-endian on disk

    Image<uint16_t> img(static_cast<int>(png_get_image_width(png, info)),
                        static_cast<int>(png_get_image_height(png, info)));
    std::vector<png_bytep> rows(img.height);
    for (int n = 0; n < img.height; ++n)
        rows[n] = reinterpret_cast<png_bytep>(&img.at(0, n));
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_png16(const Image<uint16_t>& img, const std::string& path) {
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot write " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("png write error: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_set_swap(png);
    for (int n = 0; n < img.height; ++n)
        png_write_row(png, reinterpret_cast<png_const_bytep>(&img.at(0, n)));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image<uint16_t> read_pgm16(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw std::runtime_error("not a binary PGM: " + path);
    auto next_token = [&in, &path]() {
        std::string tok;
        while (in >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
        throw std::runtime_error("truncated PGM header: " + path);
    };
    int w = std::stoi(next_token());
    int h = std::stoi(next_token());
    int maxval = std::stoi(next_token());
    if (maxval < 256 || maxval > 65535) throw std::runtime_error("unsupported PGM bit depth: " + path);
    in.get();  // single whitespace after maxval

    Image<uint16_t> img(w, h);
    std::vector<uint8_t> raw(static_cast<size_t>(w) * h * 2);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw std::runtime_error("truncated PGM data: " + path);
    for (size_t i = 0; i < img.data.size(); ++i)
        img.data[i] = static_cast<uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);  // Netpbm is big-endian
    return img;
}

void write_pgm16(const Image<uint16_t>& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "P5\n" << img.width << " " << img.height << "\n65535\n";
    std::vector<uint8_t> raw(img.data.size() * 2);
    for (size_t i = 0; i < img.data.size(); ++i) {
        raw[2 * i] = static_cast<uint8_t>(img.data[i] >> 8);
        raw[2 * i + 1] = static_cast<uint8_t>(img.data[i] & 0xff);
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

}  // namespace

CameraConfig load_intrinsics(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    in >> j;
    CameraConfig cfg;
    cfg.intrinsics.fx = j.at("fx").get<double>();
    cfg.intrinsics.fy = j.at("fy").get<double>();
    cfg.intrinsics.cx = j.at("cx").get<double>();
    cfg.intrinsics.cy = j.at("cy").get<double>();
    cfg.intrinsics.width = j.at("width").get<int>();
    cfg.intrinsics.height = j.at("height").get<int>();
    cfg.depth_scale = j.value("depth_scale", 5000.0);
    cfg.intrinsics.validate();
    return cfg;
}

void save_intrinsics(const CameraConfig& cfg, const std::string& path) {
    nlohmann::json j{{"fx", cfg.intrinsics.fx},       {"fy", cfg.intrinsics.fy},
                     {"cx", cfg.intrinsics.cx},       {"cy", cfg.intrinsics.cy},
                     {"width", cfg.intrinsics.width}, {"height", cfg.intrinsics.height},
                     {"depth_scale", cfg.depth_scale}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

DepthFrame load_depth_frame(const std::string& path, double depth_scale, const Intrinsics& intrinsics) {
    if (depth_scale <= 0) throw std::invalid_argument("depth_scale must be positive");
    Image<uint16_t> raw = has_suffix(path, ".pgm") ? read_pgm16(path) : read_png16(path);
    if (raw.width != intrinsics.width || raw.height != intrinsics.height) {
        std::ostringstream msg;
        msg << "depth image " << raw.width << "x" << raw.height << " does not match intrinsics "
            << intrinsics.width << "x" << intrinsics.height << ": " << path;
        throw std::runtime_error(msg.str());
    }
    DepthFrame frame;
    frame.intrinsics = intrinsics;
    frame.depth = Image<double>(raw.width, raw.height, 0.0);
    frame.valid = Image<uint8_t>(raw.width, raw.height, 0);
    for (size_t i = 0; i < raw.data.size(); ++i) {
        if (raw.data[i] > 0) {
            frame.depth.data[i] = raw.data[i] / depth_scale;
            frame.valid.data[i] = 1;
        }
    }
    return frame;
}

void save_depth_frame(const DepthFrame& frame, double depth_scale, const std::string& path) {
    Image<uint16_t> raw(frame.width(), frame.height(), 0);
    for (size_t i = 0; i < raw.data.size(); ++i) {
        if (!frame.valid.data[i]) continue;
        double ticks = std::round(frame.depth.data[i] * depth_scale);
        raw.data[i] = static_cast<uint16_t>(std::clamp(ticks, 1.0, 65535.0));
    }
    if (has_suffix(path, ".pgm"))
        write_pgm16(raw, path);
    else
        write_png16(raw, path);
}

std::vector<TrajectoryEntry> load_trajectory(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<TrajectoryEntry> traj;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ss(line);
        double ts, tx, ty, tz, qx, qy, qz, qw;
        if (!(ss >> ts >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
            throw std::runtime_error("malformed trajectory line " + std::to_string(lineno) + " in " + path);
        }
        std::string extra;
        if (ss >> extra)
            throw std::runtime_error("malformed trajectory line " + std::to_string(lineno) + " in " + path);
        double qn = std::sqrt(qx * qx + qy * qy + qz * qz + qw * qw);
        if (qn == 0.0)
            throw std::runtime_error("zero quaternion at line " + std::to_string(lineno) + " in " + path);
        if (std::abs(qn - 1.0) > 1e-3)
            std::cerr << "warning: non-unit quaternion (|q|=" << qn << ") at line " << lineno
                      << " of " << path << ", renormalizing\n";
        traj.push_back({ts, Pose::from_quaternion(qx, qy, qz, qw, Vec3(tx, ty, tz))});
    }
    if (traj.empty()) throw std::runtime_error("empty trajectory: " + path);
    std::stable_sort(traj.begin(), traj.end(),
                     [](const TrajectoryEntry& a, const TrajectoryEntry& b) { return a.timestamp < b.timestamp; });
    return traj;
}

void save_trajectory(const std::vector<TrajectoryEntry>& traj, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "# timestamp tx ty tz qx qy qz qw\n";
    out.precision(17);
    for (const auto& e : traj) {
        Eigen::Quaterniond q(e.pose.R);
        out << e.timestamp << " " << e.pose.t.x() << " " << e.pose.t.y() << " " << e.pose.t.z() << " "
            << q.x() << " " << q.y() << " " << q.z() << " " << q.w() << "\n";
    }
}

}  // namespace curvsdf
