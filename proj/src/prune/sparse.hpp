#pragma once

#include "infer/mc.hpp"
#include "prune/prune.hpp"

namespace bnnkit {

// Compressed sparse rows over the input dimension of a pruned dense layer.
// mu and sigma share one sparsity pattern.
template <class T>
struct SparseKernelT {
    int64_t rows = 0, cols = 0;
    std::vector<int64_t> row_offsets; // rows + 1
    std::vector<int32_t> col_indices; // nnz
    std::vector<T> mu_values;
    std::vector<T> sigma_values;
    std::vector<int64_t> flat_indices; // row*cols+col per nnz, for noise lookup

    int64_t nnz() const { return static_cast<int64_t>(col_indices.size()); }
};

// A pruned graph with its dense layers converted to CSR. Conv layers keep the
// masked dense path.
template <class T>
struct SparseModelT {
    const ModelGraphT<T>* graph = nullptr;
    std::vector<SparseKernelT<T>> dense_kernels; // aligned with graph layers (empty when n/a)
    std::vector<char> is_sparse;
};

using SparseModel = SparseModelT<float>;

template <class T>
SparseKernelT<T> to_csr(const VariationalParamT<T>& w);

// Requires a graph that went through pruning (masks installed).
template <class T>
SparseModelT<T> convert_to_sparse(const ModelGraphT<T>& g);

// predict_mc through the CSR kernels; identical noise streams to the dense
// path, so outputs agree with masked dense inference up to summation order.
template <class T>
PredictiveSamplesT<T> sparse_predict_mc(const SparseModelT<T>& m, const TensorT<T>& x, int64_t s,
                                        uint64_t seed, std::vector<int32_t> labels = {});

// y[b,j] += sum_i values[i,j] * x[b,i] over the kernel's nonzeros
template <class T>
void csr_matmul_add(const SparseKernelT<T>& k, const std::vector<T>& values, const TensorT<T>& x,
                    TensorT<T>& y);

} // namespace bnnkit
