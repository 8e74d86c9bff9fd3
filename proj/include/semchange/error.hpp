#pragma once

#include <stdexcept>
#include <string>

namespace semchange {

// Base for every error raised by the library. Callers that batch over many
// words catch this to skip a single word without aborting the run.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace semchange
