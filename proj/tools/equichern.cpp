#include "equichern/harness.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

std::vector<std::size_t> parse_sizes(const std::string& text)
{
    std::vector<std::size_t> ns;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        std::size_t used = 0;
        const unsigned long v = std::stoul(item, &used);
        if (used != item.size()) throw equichern::UsageError("bad N value '" + item + "'");
        ns.push_back(v);
    }
    return ns;
}

// Writes through a file when --out was given, otherwise to stdout.
template <class Fn>
void emit(const std::string& out_path, Fn&& write)
{
    if (out_path.empty()) {
        write(std::cout);
        return;
    }
    const std::string path = equichern::resolve_output_path(out_path);
    std::ofstream file(path);
    if (!file) throw equichern::UsageError("cannot open '" + path + "' for writing");
    write(file);
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Numerical checks for equivariant Chern-Weil forms on loop spaces"};
    app.require_subcommand(1);

    equichern::SuiteConfig config;
    std::string format = "text", out_path, sizes;
    std::string check;

    auto* run = app.add_subcommand("run", "Run a suite of checks");
    run->add_option("suite", config.suite, "Suite name")->required()->check(CLI::IsMember(equichern::suite_names()));
    run->add_option("--n", config.n, "Loop samples (power of two, 32..1024)");
    run->add_option("--q", config.q, "Averaging nodes");
    run->add_option("--tol-scale", config.tol_scale, "Multiplier applied to every tolerance");
    run->add_option("--seed", config.seed, "Random seed");
    run->add_option("--format", format, "Report format")->check(CLI::IsMember({"text", "json-lines"}));
    run->add_option("--out", out_path, "Write the report to this file");

    auto* study = app.add_subcommand("study", "Measure a defect across loop resolutions");
    study->add_option("check", check, "Check id")->required()->check(CLI::IsMember(equichern::study_checks()));
    study->add_option("--n", sizes, "Comma-separated N values")->required();
    study->add_option("--seed", config.seed, "Random seed");
    study->add_option("--out", out_path, "Write the table to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*run) {
            config.format = format == "json-lines" ? equichern::ReportFormat::json_lines : equichern::ReportFormat::text;
            const auto results = equichern::run_suite(config);
            emit(out_path, [&](std::ostream& o) { equichern::write_report(o, results, config.format); });
            return equichern::all_passed(results) ? 0 : 1;
        }
        const auto result = equichern::convergence_study(check, parse_sizes(sizes), config);
        emit(out_path, [&](std::ostream& o) { equichern::write_study(o, result); });
        return 0;
    } catch (const equichern::UsageError& e) {
        std::cerr << "equichern: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument&) {
        std::cerr << "equichern: N values must be integers\n";
        return 2;
    }
}
