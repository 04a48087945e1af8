// Command-line front end. Subcommands cover the full pipeline: synthetic
// data rendering, backbone pretraining, unaligned dataset construction,
// scale-predictor training, generation, scale sweeps, evaluation, ablations.

#include <CLI11.hpp>

#include "adascale/cli/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"adaptive per-pixel control relaxation for a toy diffusion model"};
    app.require_subcommand(1);

    adascale::cli::register_all(app);

    CLI11_PARSE(app, argc, argv);
    return 0;
}
