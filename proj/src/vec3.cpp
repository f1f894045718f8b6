#include "hitadv/vec3.hpp"

#include <algorithm>
#include <cmath>

namespace hitadv {

SymEigen3 sym_eigen3(const Mat3& A) {
  // Cyclic Jacobi; a handful of sweeps is plenty for 3x3.
  double a[3][3] = {{A(0, 0), A(0, 1), A(0, 2)},
                    {A(1, 0), A(1, 1), A(1, 2)},
                    {A(2, 0), A(2, 1), A(2, 2)}};
  double v[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

  for (int sweep = 0; sweep < 32; ++sweep) {
    double off = std::abs(a[0][1]) + std::abs(a[0][2]) + std::abs(a[1][2]);
    if (off < 1e-300) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (int i = 0; i < 3; ++i) {
          double aip = a[i][p], aiq = a[i][q];
          a[i][p] = c * aip - s * aiq;
          a[i][q] = s * aip + c * aiq;
        }
        for (int i = 0; i < 3; ++i) {
          double api = a[p][i], aqi = a[q][i];
          a[p][i] = c * api - s * aqi;
          a[q][i] = s * api + c * aqi;
        }
        for (int i = 0; i < 3; ++i) {
          double vip = v[i][p], viq = v[i][q];
          v[i][p] = c * vip - s * viq;
          v[i][q] = s * vip + c * viq;
        }
      }
    }
  }

  std::array<int, 3> order = {0, 1, 2};
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return a[i][i] < a[j][j]; });

  SymEigen3 out;
  for (int r = 0; r < 3; ++r) {
    int c = order[r];
    out.values[r] = a[c][c];
    out.vectors[r] = normalized(Vec3{v[0][c], v[1][c], v[2][c]});
  }
  return out;
}

Mat3 quat_to_matrix(const Quat& q) {
  double w = q.w, x = q.x, y = q.y, z = q.z;
  Mat3 R;
  R(0, 0) = 1 - 2 * (y * y + z * z);
  R(0, 1) = 2 * (x * y - w * z);
  R(0, 2) = 2 * (x * z + w * y);
  R(1, 0) = 2 * (x * y + w * z);
  R(1, 1) = 1 - 2 * (x * x + z * z);
  R(1, 2) = 2 * (y * z - w * x);
  R(2, 0) = 2 * (x * z - w * y);
  R(2, 1) = 2 * (y * z + w * x);
  R(2, 2) = 1 - 2 * (x * x + y * y);
  return R;
}

Quat quat_from_rotation_vector(const Vec3& w) {
  double angle = norm(w);
  if (angle < 1e-12) {
    // first-order expansion keeps the map smooth near zero
    Quat q{1.0, 0.5 * w.x, 0.5 * w.y, 0.5 * w.z};
    return q.normalized();
  }
  double half = 0.5 * angle;
  double s = std::sin(half) / angle;
  return Quat{std::cos(half), s * w.x, s * w.y, s * w.z};
}

}  // namespace hitadv
