#include "reachguard/benchmark.hpp"

namespace reachguard {

SystemModel three_tank() {
  PlantModel plant;
  plant.A.resize(3, 3);
  plant.A << -0.000136, 0.0, 0.000072,
             0.0, -0.000229, 0.00153,
             0.000136, -0.000111, -0.001602;
  plant.B.resize(3, 2);
  plant.B << 64.94, 0.0,
             0.0, 64.94,
             0.0, 0.0;
  plant.C.resize(2, 3);
  plant.C << 1.0, 0.0, 0.0,
             0.0, 1.0, 0.0;
  plant.D = Matrix::Zero(2, 2);

  ControllerModel ctrl;
  ctrl.A.resize(3, 3);
  ctrl.A << -0.33, 0.09, -122.34,
            0.10, -0.33, 114.69,
            -0.01, -0.16, -0.002;
  ctrl.B.resize(3, 2);
  ctrl.B << 0.0200, 0.0013,
            0.0019, 0.0380,
            0.0149, 0.1549;
  ctrl.C.resize(2, 3);
  ctrl.C << -0.0047, 0.0014, -1.8841,
            0.0016, -0.0045, 1.7662;
  ctrl.D = Matrix::Zero(2, 2);

  DetectorModel det;
  det.L.resize(3, 2);
  det.L << 0.02001, 0.00131,
           0.00192, 0.03802,
           0.01493, 0.15494;
  det.Pi = Matrix::Identity(2, 2);

  Matrix psi = Eigen::Vector3d(1e-4, 10.0, 1e-4).asDiagonal();
  return SystemModel{plant, ctrl, det, AttackModel(Matrix::Identity(2, 2)),
                     make_safe_set(psi, Vector::Zero(3))};
}

}  // namespace reachguard
