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

#include "sonoclass/error.hpp"

namespace sonoclass {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MISSING_FILE";
    case ErrorCode::DuplicateId: return "DUPLICATE_ID";
    case ErrorCode::InconsistentPatientLabel: return "INCONSISTENT_PATIENT_LABEL";
    case ErrorCode::MalformedRow: return "MALFORMED_ROW";
    case ErrorCode::InvalidLineage: return "INVALID_LINEAGE";
    case ErrorCode::InvalidConfig: return "INVALID_CONFIG";
    case ErrorCode::UnsupportedImage: return "UNSUPPORTED_IMAGE";
    case ErrorCode::EmptyImage: return "EMPTY_IMAGE";
    case ErrorCode::NonSquareInput: return "NON_SQUARE_INPUT";
    case ErrorCode::WrongSize: return "WRONG_SIZE";
    case ErrorCode::OutOfRange: return "OUT_OF_RANGE";
    case ErrorCode::ParamsOutOfRange: return "PARAMS_OUT_OF_RANGE";
    case ErrorCode::SingleClassManifest: return "SINGLE_CLASS_MANIFEST";
    case ErrorCode::TooFewPatients: return "TOO_FEW_PATIENTS";
    case ErrorCode::AugmentSourceOutsideTrain: return "AUGMENT_SOURCE_OUTSIDE_TRAIN";
    case ErrorCode::UnknownBackbone: return "UNKNOWN_BACKBONE";
    case ErrorCode::WeightsUnavailable: return "WEIGHTS_UNAVAILABLE";
    case ErrorCode::ShapeMismatch: return "SHAPE_MISMATCH";
    case ErrorCode::LengthMismatch: return "LENGTH_MISMATCH";
    case ErrorCode::EmptyBatch: return "EMPTY_BATCH";
    case ErrorCode::EmptyPartition: return "EMPTY_PARTITION";
    case ErrorCode::NonFiniteLoss: return "NON_FINITE_LOSS";
    case ErrorCode::IoFailure: return "IO_FAILURE";
    case ErrorCode::MetadataMismatch: return "METADATA_MISMATCH";
    case ErrorCode::SingleClassSet: return "SINGLE_CLASS_SET";
    case ErrorCode::WrongFoldCount: return "WRONG_FOLD_COUNT";
    case ErrorCode::MissingCheckpoint: return "MISSING_CHECKPOINT";
    case ErrorCode::ConfigHashMismatch: return "CONFIG_HASH_MISMATCH";
  }
  return "UNKNOWN_ERROR";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::IoFailure:
      return false;
    default:
      return true;
  }
}

}  // namespace sonoclass
