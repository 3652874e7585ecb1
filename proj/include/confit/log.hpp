#ifndef CONFIT_LOG_HPP_
#define CONFIT_LOG_HPP_

#include <string>
#include <string_view>

namespace confit::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

/// Reads CONFIT_LOG (error, warn, info, debug). Default: warn.
Level level_from_env();

void set_level(Level level);
Level level();

/// Thread-safe line to stderr.
void write(Level level, std::string_view message);

inline void error(std::string_view m) { write(Level::Error, m); }
inline void warn(std::string_view m) { write(Level::Warn, m); }
inline void info(std::string_view m) { write(Level::Info, m); }
inline void debug(std::string_view m) { write(Level::Debug, m); }

}  // namespace confit::log

#endif  // CONFIT_LOG_HPP_
