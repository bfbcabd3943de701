// Copyright 2026 The sonoclass Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace sonoclass {

/// Stable error codes used across the pipeline. Validation-class codes map
/// to CLI exit code 1, runtime-class codes to exit code 2.
enum class ErrorCode {
  // ingest
  MissingFile,
  DuplicateId,
  InconsistentPatientLabel,
  MalformedRow,
  InvalidLineage,
  InvalidConfig,
  UnsupportedImage,
  // preprocess
  EmptyImage,
  NonSquareInput,
  WrongSize,
  OutOfRange,
  // augment
  ParamsOutOfRange,
  SingleClassManifest,
  // cv_split
  TooFewPatients,
  AugmentSourceOutsideTrain,
  // model_zoo
  UnknownBackbone,
  WeightsUnavailable,
  ShapeMismatch,
  // trainer
  LengthMismatch,
  EmptyBatch,
  EmptyPartition,
  NonFiniteLoss,
  IoFailure,
  MetadataMismatch,
  // eval_report
  SingleClassSet,
  WrongFoldCount,
  MissingCheckpoint,
  ConfigHashMismatch,
};

const char* error_code_name(ErrorCode code);

/// True for errors caused by bad inputs/configuration (CLI exit code 1),
/// false for runtime failures (exit code 2).
bool is_validation_error(ErrorCode code);

class PipelineError : public std::runtime_error {
 public:
  PipelineError(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sonoclass
