#pragma once

#include <Eigen/Core>

#include "crest/lie.hpp"

namespace crest {

enum class MeasurementKind { TipPose, BasePose, Gyro };

/// One timestamped sensor reading, asynchronous with the estimation grid.
/// Pose kinds fill `pose`, gyro fills `angular_rate`. The noise covariance is
/// attached by whoever creates the measurement (simulator or estimator
/// config); it does not travel through the measurement file.
struct Measurement {
  MeasurementKind kind = MeasurementKind::TipPose;
  double timestamp = 0.0;
  int node_index = 0;
  Pose pose;
  Vec3 angular_rate = Vec3::Zero();
  Eigen::MatrixXd noise;  // covariance, 6x6 for pose kinds, 3x3 for gyro

  static const char* kind_name(MeasurementKind k) {
    switch (k) {
      case MeasurementKind::TipPose: return "TipPose";
      case MeasurementKind::BasePose: return "BasePose";
      case MeasurementKind::Gyro: return "Gyro";
    }
    return "?";
  }
};

}  // namespace crest
