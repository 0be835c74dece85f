#include "flowbot/fields.hpp"

#include <fstream>
#include <sstream>

#include "flowbot/detail/format.hpp"
#include "flowbot/errors.hpp"

namespace flowbot {

Eigen::Vector3d nearest_point_on_axis(const Eigen::Vector3d& p, const Eigen::Vector3d& origin,
                                      const Eigen::Vector3d& direction) {
  return origin + direction.dot(p - origin) * direction;
}

std::vector<Eigen::Vector3d> gt_articulation_flow(const Observation& obs,
                                                  const JointSpec& joint) {
  const std::size_t n = obs.points.size();
  std::vector<Eigen::Vector3d> flow(n, Eigen::Vector3d::Zero());

  if (joint.type == JointType::Prismatic) {
    for (std::size_t i = 0; i < n; ++i)
      if (obs.mask[i]) flow[i] = joint.axis_direction;
    return flow;
  }

  if (obs.mask_count() == 0)
    throw DegenerateError("articulation flow: empty mask on a revolute joint");

  // Instantaneous velocity of a masked point under +dq is w x (p - v); the
  // axis-parallel component of (p - v) drops out of the cross product.
  double max_norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!obs.mask[i]) continue;
    flow[i] = joint.axis_direction.cross(obs.points[i] - joint.axis_origin);
    max_norm = std::max(max_norm, flow[i].norm());
  }
  if (max_norm < 1e-12)
    throw DegenerateError("articulation flow: all masked points lie on the joint axis");
  for (std::size_t i = 0; i < n; ++i)
    if (obs.mask[i]) flow[i] /= max_norm;
  return flow;
}

std::vector<Eigen::Vector3d> gt_articulation_projection(const Observation& obs,
                                                        const JointSpec& joint) {
  const std::size_t n = obs.points.size();
  std::vector<Eigen::Vector3d> projection(n, Eigen::Vector3d::Zero());
  const Eigen::Vector3d& w = joint.axis_direction;
  for (std::size_t i = 0; i < n; ++i) {
    if (!obs.mask[i]) continue;
    const Eigen::Vector3d d = obs.points[i] - joint.axis_origin;
    projection[i] = w * w.dot(d) - d;  // (ww^T - I)(p - v)
  }
  return projection;
}

DenseFields gt_fields(const Observation& obs, const JointSpec& joint) {
  DenseFields fields;
  fields.flow = gt_articulation_flow(obs, joint);
  fields.projection = gt_articulation_projection(obs, joint);
  fields.mask = obs.mask;
  return fields;
}

double field_error(const DenseFields& predicted, const DenseFields& truth) {
  const std::size_t n = truth.flow.size();
  if (predicted.flow.size() != n || predicted.projection.size() != n ||
      truth.projection.size() != n)
    throw std::invalid_argument("field_error: field length mismatch");
  if (n == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += (predicted.flow[i] - truth.flow[i]).squaredNorm() +
             (predicted.projection[i] - truth.projection[i]).squaredNorm();
  }
  return total / static_cast<double>(n);
}

void write_fields_csv(const Observation& obs, const DenseFields& fields,
                      const std::string& path) {
  if (fields.flow.size() != obs.points.size() || fields.projection.size() != obs.points.size())
    throw std::invalid_argument("write_fields_csv: field length mismatch with observation");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write fields CSV '" + path + "'");
  out << kFieldsCsvHeader << "\n";
  for (std::size_t i = 0; i < obs.points.size(); ++i) {
    const Eigen::Vector3d& p = obs.points[i];
    const Eigen::Vector3d& f = fields.flow[i];
    const Eigen::Vector3d& r = fields.projection[i];
    out << i << ',' << detail::g17(p.x()) << ',' << detail::g17(p.y()) << ','
        << detail::g17(p.z()) << ',' << detail::g17(f.x()) << ',' << detail::g17(f.y()) << ','
        << detail::g17(f.z()) << ',' << detail::g17(r.x()) << ',' << detail::g17(r.y()) << ','
        << detail::g17(r.z()) << ',' << int(fields.mask[i]) << "\n";
  }
  if (!out) throw IoError("failed while writing '" + path + "'");
}

namespace {

std::vector<std::string_view> split_csv_row(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

}  // namespace

LoadedFields read_fields_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open fields CSV '" + path + "'");

  std::string line;
  if (!std::getline(in, line))
    throw ParseError("fields CSV '" + path + "': empty file (expected header '" +
                     std::string(kFieldsCsvHeader) + "')");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kFieldsCsvHeader)
    throw ParseError("fields CSV '" + path + "': bad header '" + line + "' (expected '" +
                     std::string(kFieldsCsvHeader) + "')");

  LoadedFields loaded;
  long row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "fields CSV '" + path + "' row " + std::to_string(row);
    const auto cells = split_csv_row(line);
    if (cells.size() != 11)
      throw ParseError(where + ": expected 11 columns, got " + std::to_string(cells.size()));
    if (detail::parse_long(cells[0], where + " idx") != row)
      throw ParseError(where + ": idx column out of sequence (got '" + std::string(cells[0]) +
                       "')");
    auto num = [&](int c) { return detail::parse_double(cells[c], where); };
    loaded.points.emplace_back(num(1), num(2), num(3));
    loaded.fields.flow.emplace_back(num(4), num(5), num(6));
    loaded.fields.projection.emplace_back(num(7), num(8), num(9));
    const long mask = detail::parse_long(cells[10], where + " mask");
    if (mask != 0 && mask != 1)
      throw ParseError(where + ": mask must be 0 or 1, got " + std::to_string(mask));
    loaded.fields.mask.push_back(static_cast<std::uint8_t>(mask));
    ++row;
  }
  return loaded;
}

}  // namespace flowbot
