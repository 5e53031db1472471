#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "tsr/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Sketch and text retrieval over financial time series"};
  app.require_subcommand(1);
  tsr::cli::register_commands(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << '\n';
    return 2;
  } catch (const tsr::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
