#ifndef RBR_ERROR_HPP_
#define RBR_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace rbr {

enum class ErrorCode {
  kEmptyMask,
  kDimsMismatch,
  kConfig,
  kNonPartitionSlic,
  kEmptyBatch,
  kDivergence,
  kZeroVector,
  kInvalidArgument,
  kIo,
  kMagicMismatch,
  kUnsupportedVersion,
  kTruncatedFile,
  kFormat,
  kDimensionOverflow,
};

std::string_view error_code_name(ErrorCode code);

// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rbr

#endif  // RBR_ERROR_HPP_
