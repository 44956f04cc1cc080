/// @file apfem.hpp
/// @brief Umbrella header for the anisotropic-diffusion finite-element library.
#pragma once

#include <apfem/types.hpp>
#include <apfem/reference.hpp>
#include <apfem/grid.hpp>
#include <apfem/field.hpp>
#include <apfem/cases.hpp>
#include <apfem/sparse.hpp>
#include <apfem/assemble.hpp>
#include <apfem/linalg.hpp>
#include <apfem/system.hpp>
#include <apfem/fieldline.hpp>
#include <apfem/experiment.hpp>
