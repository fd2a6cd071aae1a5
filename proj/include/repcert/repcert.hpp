#pragma once

#include "repcert/certify.hpp"
#include "repcert/error.hpp"
#include "repcert/io.hpp"
#include "repcert/kgroup.hpp"
#include "repcert/linalg.hpp"
#include "repcert/lsgames.hpp"
#include "repcert/parallel.hpp"
#include "repcert/presentations.hpp"
#include "repcert/seesaw.hpp"
#include "repcert/stability.hpp"

namespace repcert {
inline constexpr const char* version = "0.1.0";
}
