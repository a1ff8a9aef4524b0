#include <iostream>

#include "CLI11.hpp"
#include "run.hpp"
#include "saferl/errors.hpp"

int main(int argc, char** argv) {
    using namespace saferl::cli;
    CLI::App app{"Shielded RL experiment runner"};
    RunSpec spec;
    std::string mode = "evaluate", agent = "random", shield;
    int epochs = 0, episodes = 0, t_max = 0;

    app.add_option("--scenario", spec.scenario, "Bundled scenario name or path to a scenario file")
        ->capture_default_str();
    app.add_option("--mode", mode)->check(CLI::IsMember({"train", "evaluate", "benchmark-shield", "fuzz-safety"}))
        ->capture_default_str();
    app.add_option("--agent", agent)->check(CLI::IsMember({"random", "scripted", "external"}))->capture_default_str();
    app.add_option("--seed", spec.seed)->capture_default_str();
    app.add_option("--epochs", epochs, "Override the number of epochs")->check(CLI::PositiveNumber);
    app.add_option("--episodes-per-epoch", episodes)->check(CLI::PositiveNumber);
    app.add_option("--out", spec.out, "Output directory")->capture_default_str();
    app.add_option("--shield", shield, "Override the scenario's shield setting")->check(CLI::IsMember({"on", "off"}));
    app.add_option("--endpoint", spec.endpoint, "Agent endpoint: tcp://host:port or unix:///path")
        ->capture_default_str();
    app.add_option("--timeout-ms", spec.timeout_ms, "Agent reply timeout")->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--t-max-episode", t_max, "Override the episode step limit")->check(CLI::PositiveNumber);
    app.add_option("--train-config", spec.train_config, "JSON file overriding training hyperparameters")
        ->check(CLI::ExistingFile);
    app.add_flag("--resume", spec.resume, "Continue a training run from its last checkpoint");
    CLI11_PARSE(app, argc, argv);

    try {
        spec.mode = parse_mode(mode);
        spec.agent = parse_agent(agent);
        if (epochs > 0) spec.epochs = epochs;
        if (episodes > 0) spec.episodes_per_epoch = episodes;
        if (t_max > 0) spec.t_max_episode = t_max;
        if (!shield.empty()) spec.shield = shield == "on";
        return run(spec, std::cerr);
    } catch (const saferl::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
