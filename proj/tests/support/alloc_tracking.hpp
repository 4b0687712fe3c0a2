#pragma once

// Counts live heap bytes allocated through the global operator new. Linking
// alloc_tracking.cpp into a binary replaces the global allocation functions.

#include <cstddef>

namespace topkcal::testsupport {

std::size_t live_bytes() noexcept;
std::size_t peak_bytes() noexcept;
/// Sets the peak to the current live size.
void reset_peak() noexcept;

}  // namespace topkcal::testsupport
