// facegen: write a batch of procedural face images for experiments.

#include "dreamid/facegen.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"procedural face image generator"};
    std::string out = ".";
    int count = 8, res = 64;
    std::uint64_t seed = 0;
    app.add_option("--out", out, "output directory");
    app.add_option("--count", count, "number of faces");
    app.add_option("--seed", seed, "base seed");
    app.add_option("--res", res, "image resolution");
    CLI11_PARSE(app, argc, argv);

    try {
        std::filesystem::create_directories(out);
        for (int i = 0; i < count; ++i) {
            dreamid::Image face = dreamid::synth_face(seed + i, res);
            auto path = std::filesystem::path(out) /
                        ("face-" + std::to_string(seed + i) + ".ppm");
            dreamid::write_ppm(face, path);
            std::cout << path.string() << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
