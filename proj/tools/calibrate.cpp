// Monte-Carlo calibration of the tail constants; writes the JSON table that the
// library and tests load.

#include <chrono>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "psketch/calibration.hpp"

using namespace psketch;

int main(int argc, char** argv)
{
    CLI::App app{"calibrate: estimate C_p, U_p, L_p, alpha_p, c_p and omega"};
    std::string out = "data/calibration_constants.json";
    std::uint64_t seed = 20240611;
    std::vector<double> ps = {1.0, 1.25, 1.5, 1.75};
    double scale = 1.0;
    app.add_option("--out", out, "output JSON path");
    app.add_option("--seed", seed, "seed");
    app.add_option("--p", ps, "p values to calibrate");
    app.add_option("--scale", scale, "multiplier on every trial budget");
    CLI11_PARSE(app, argc, argv);

    CalibrationBudget b;
    auto scaled = [&](std::size_t v) { return static_cast<std::size_t>(static_cast<double>(v) * scale); };
    b.tail_trials = scaled(b.tail_trials);
    b.gaussian_trials = scaled(b.gaussian_trials);
    b.dominance_draws = scaled(b.dominance_draws);
    b.tail_constant_draws = scaled(b.tail_constant_draws);
    b.bucket_trials = scaled(b.bucket_trials);

    CalibrationConstants table;
    for (double p : ps) {
        const auto t0 = std::chrono::steady_clock::now();
        const StableConstants k = calibrate(p, seed, b);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cerr << "p=" << p << "  C=" << k.C.value << "  U=" << k.U.value << "  L=" << k.L.value
                  << "  alpha=" << k.alpha.value << "  c=" << k.c.value << " (closed form "
                  << stable_tail_constant(p) << ")  omega=" << k.omega.value << "  [" << secs << " s]\n";
        table.set(k);
    }
    table.save(out);
    std::cerr << "wrote " << out << '\n';
    return 0;
}
