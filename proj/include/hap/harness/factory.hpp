#pragma once

#include <memory>

#include "hap/baselines/baselines.hpp"
#include "hap/core/rng.hpp"
#include "hap/envs/task_space.hpp"
#include "hap/teacher/teachers.hpp"

namespace hap::harness {

/// Builds any curriculum kind over `space`. Adversarial kinds get the warm-up schedule.
inline std::unique_ptr<teacher::Curriculum> make_curriculum(teacher::TeacherKind kind, const envs::TaskSpace& space,
                                                            const teacher::CurriculumConfig& config, RngStream rng) {
  const std::size_t n = space.size();
  switch (kind) {
    case teacher::TeacherKind::kUniform: return std::make_unique<baselines::UniformCurriculum>(n, config);
    case teacher::TeacherKind::kOrdered: return std::make_unique<baselines::OrderedCurriculum>(space, config);
    case teacher::TeacherKind::kExp3: return std::make_unique<baselines::Exp3Curriculum>(n, config);
    case teacher::TeacherKind::kTscl: return std::make_unique<baselines::TsclCurriculum>(n, config);
    case teacher::TeacherKind::kLogit: return std::make_unique<teacher::LogitTeacher>(n, config);
    case teacher::TeacherKind::kHistoryMlp: return std::make_unique<teacher::HistoryMlpTeacher>(n, config, rng);
    case teacher::TeacherKind::kMetaAC: return std::make_unique<teacher::MetaTeacher>(n, config, rng);
  }
  throw ConfigError("unknown teacher kind");
}

}  // namespace hap::harness
