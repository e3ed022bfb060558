#include <iostream>

#include "divlab/error.hpp"
#include "divlab/experiment.hpp"

int main(int argc, char** argv) {
  using namespace divlab;
  try {
    const ParseOutcome parsed = parse_config(argc, argv);
    if (parsed.help) {
      std::cout << parsed.help_text;
      return kExitOk;
    }
    const RunOutcome outcome = run(parsed.config, std::cout);
    if (outcome.exit_code == kExitNumeric) {
      std::cerr << "divlab: at least one run recorded a numeric abort; see the '# abort:' lines\n";
    }
    return outcome.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "divlab: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "divlab: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericError& e) {
    std::cerr << "divlab: numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "divlab: " << e.what() << "\n";
    return kExitConfig;
  }
}
