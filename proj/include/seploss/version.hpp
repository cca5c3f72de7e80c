#ifndef SEPLOSS_VERSION_HPP
#define SEPLOSS_VERSION_HPP

namespace seploss {

inline constexpr const char* kVersion = "0.1.0";

}

#endif
