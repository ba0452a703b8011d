#pragma once

namespace semimage {

/// Reads SEMIMAGE_THREADS (default 1) and caps the OpenMP worker count.
/// Returns the count in effect. Throws UsageError on a malformed value.
int configure_threads();

/// Current OpenMP worker cap.
int thread_count();

}  // namespace semimage
