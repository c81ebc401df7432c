#include "dreamid/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dreamid {

namespace {
unsigned char to_byte(Scalar v) {
    Scalar c = std::clamp(v, 0.0, 1.0);
    return static_cast<unsigned char>(std::lround(c * 255.0));
}
}  // namespace

std::string ppm_bytes(const Image& img) {
    std::ostringstream out;
    out << "P6\n" << img.width() << " " << img.height() << "\n255\n";
    for (Index y = 0; y < img.height(); ++y)
        for (Index x = 0; x < img.width(); ++x)
            for (int c = 0; c < 3; ++c)
                out.put(static_cast<char>(to_byte(img.rgb[c](y, x))));
    return out.str();
}

void write_ppm(const Image& img, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    std::string bytes = ppm_bytes(img);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path.string());
}

Image read_ppm(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path.string());
    std::string magic;
    f >> magic;
    if (magic != "P6") throw IoError("not a P6 PPM: " + path.string());
    // skip whitespace and comment lines
    auto next_int = [&f, &path]() {
        int c = f.peek();
        while (c == ' ' || c == '\n' || c == '\r' || c == '\t' || c == '#') {
            if (c == '#') {
                std::string line;
                std::getline(f, line);
            } else {
                f.get();
            }
            c = f.peek();
        }
        long v;
        if (!(f >> v)) throw IoError("bad PPM header: " + path.string());
        return v;
    };
    long w = next_int();
    long h = next_int();
    long maxv = next_int();
    if (maxv != 255) throw IoError("unsupported PPM max value: " + path.string());
    f.get();  // single whitespace after header
    Image img(h, w);
    std::vector<char> buf(static_cast<std::size_t>(w) * h * 3);
    f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (f.gcount() != static_cast<std::streamsize>(buf.size()))
        throw IoError("truncated PPM: " + path.string());
    std::size_t i = 0;
    for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.rgb[c](y, x) = static_cast<unsigned char>(buf[i++]) / 255.0;
    return img;
}

Image resize_bilinear(const Image& img, Index height, Index width) {
    Image out(height, width);
    const Scalar sy = static_cast<Scalar>(img.height()) / height;
    const Scalar sx = static_cast<Scalar>(img.width()) / width;
    for (Index y = 0; y < height; ++y) {
        Scalar fy = (y + 0.5) * sy - 0.5;
        Index y0 = static_cast<Index>(std::floor(fy));
        Scalar wy = fy - y0;
        Index y0c = std::clamp<Index>(y0, 0, img.height() - 1);
        Index y1c = std::clamp<Index>(y0 + 1, 0, img.height() - 1);
        for (Index x = 0; x < width; ++x) {
            Scalar fx = (x + 0.5) * sx - 0.5;
            Index x0 = static_cast<Index>(std::floor(fx));
            Scalar wx = fx - x0;
            Index x0c = std::clamp<Index>(x0, 0, img.width() - 1);
            Index x1c = std::clamp<Index>(x0 + 1, 0, img.width() - 1);
            for (int c = 0; c < 3; ++c) {
                const Mat& m = img.rgb[c];
                Scalar top = (1 - wx) * m(y0c, x0c) + wx * m(y0c, x1c);
                Scalar bot = (1 - wx) * m(y1c, x0c) + wx * m(y1c, x1c);
                out.rgb[c](y, x) = (1 - wy) * top + wy * bot;
            }
        }
    }
    return out;
}

Mat avg_pool(const Mat& m, Index factor) {
    if (m.rows() % factor != 0 || m.cols() % factor != 0)
        throw ShapeError("avg_pool: dimensions must divide by the pool factor");
    Mat out(m.rows() / factor, m.cols() / factor);
    for (Index i = 0; i < out.rows(); ++i)
        for (Index j = 0; j < out.cols(); ++j)
            out(i, j) = m.block(i * factor, j * factor, factor, factor).mean();
    return out;
}

}  // namespace dreamid
