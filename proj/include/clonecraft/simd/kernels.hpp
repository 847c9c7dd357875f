#pragma once

#include <cstddef>
#include <string_view>

namespace clonecraft::simd {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa) noexcept;

// Dense kernels over contiguous row-major storage. All gemm variants
// accumulate into C; callers zero C first when they want a plain product.
template <class T>
struct KernelTable {
  // C[m,n] += A[m,k] * B[k,n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);
  // C[m,n] += A[k,m]^T * B[k,n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);
  // C[m,n] += A[m,k] * B[n,k]^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);
  T (*dot)(std::size_t n, const T* x, const T* y);
  // y += alpha * x
  void (*axpy)(std::size_t n, T alpha, const T* x, T* y);
};

// Best ISA the running CPU supports. CLONECRAFT_SIMD=scalar forces the
// reference kernels.
Isa detect_isa() noexcept;
bool isa_supported(Isa isa) noexcept;

Isa active_isa() noexcept;
// Switches the process-wide table. Not thread-safe; meant for tests and CLI setup.
void set_active_isa(Isa isa);

template <class T>
const KernelTable<T>& table_for(Isa isa);

template <class T>
const KernelTable<T>& kernels();

namespace scalar {
template <class T>
const KernelTable<T>& table();
}  // namespace scalar

namespace avx2 {
template <class T>
const KernelTable<T>& table();
}  // namespace avx2

}  // namespace clonecraft::simd
