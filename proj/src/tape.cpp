#include "tatt/tape.hpp"

#include <algorithm>
#include <cmath>

#include "tatt/error.hpp"

namespace tatt {

const Matrix& Var::value() const {
    if (tape_ == nullptr) {
        throw ContractError("use of an unbound Var");
    }
    return tape_->value(id_);
}

Var Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

void Tape::check_owner(Var v) const {
    if (v.tape_ != this || v.id_ >= nodes_.size()) {
        throw ContractError("Var does not belong to this tape");
    }
}

Var Tape::constant(Matrix value) {
    Node n;
    n.owned = std::move(value);
    return push(std::move(n));
}

Var Tape::constant_ref(const Matrix& value) {
    Node n;
    n.external = &value;
    return push(std::move(n));
}

Var Tape::variable(const Matrix& value) {
    Node n;
    n.external = &value;
    n.requires_grad = true;
    return push(std::move(n));
}

Var Tape::record(std::vector<Var> parents, ForwardFn forward, BackwardFn backward) {
    Node n;
    n.parents.reserve(parents.size());
    std::vector<const Matrix*> in;
    in.reserve(parents.size());
    for (const Var& p : parents) {
        check_owner(p);
        n.parents.push_back(p.id_);
        in.push_back(&nodes_[p.id_].value());
        n.requires_grad = n.requires_grad || nodes_[p.id_].requires_grad;
    }
    n.owned = forward(in);
    if (!n.owned.all_finite()) {
        throw NumericError("non-finite value produced by a recorded operation (node " +
                           std::to_string(nodes_.size()) + ", shape " + n.owned.shape() + ")");
    }
    n.forward = std::move(forward);
    n.backward = std::move(backward);
    return push(std::move(n));
}

void Tape::backward(Var loss) {
    check_owner(loss);
    const Matrix& lv = nodes_[loss.id_].value();
    if (lv.rows() != 1 || lv.cols() != 1) {
        throw ContractError("backward() needs a scalar (1x1) loss, got " + lv.shape());
    }
    if (backward_done_) {
        throw ContractError("backward() already ran on this tape");
    }
    backward_done_ = true;
    if (!nodes_[loss.id_].requires_grad) {
        return;
    }
    nodes_[loss.id_].grad = Matrix(1, 1, 1.0);

    std::vector<const Matrix*> in;
    std::vector<Matrix*> in_grads;
    for (std::size_t idx = loss.id_ + 1; idx-- > 0;) {
        Node& node = nodes_[idx];
        if (!node.requires_grad || node.grad.empty() || !node.backward) {
            continue;
        }
        in.clear();
        in_grads.clear();
        for (std::size_t p : node.parents) {
            Node& parent = nodes_[p];
            in.push_back(&parent.value());
            if (parent.requires_grad) {
                if (parent.grad.empty()) {
                    parent.grad = Matrix(parent.value().rows(), parent.value().cols());
                }
                in_grads.push_back(&parent.grad);
            } else {
                in_grads.push_back(nullptr);
            }
        }
        node.backward(in, node.value(), node.grad, in_grads);
        // Interior gradients are no longer needed once propagated.
        if (node.external == nullptr && idx != loss.id_) {
            node.grad = Matrix();
        }
    }
}

const Matrix& Tape::grad(Var v) {
    check_owner(v);
    Node& n = nodes_[v.id_];
    if (n.grad.empty() && !n.value().empty()) {
        n.grad = Matrix(n.value().rows(), n.value().cols());
    }
    return n.grad;
}

bool Tape::replay_matches() const {
    std::vector<const Matrix*> in;
    for (const Node& n : nodes_) {
        if (!n.forward) {
            continue;
        }
        in.clear();
        for (std::size_t p : n.parents) {
            in.push_back(&nodes_[p].value());
        }
        if (!(n.forward(in) == n.owned)) {
            return false;
        }
    }
    return true;
}

namespace {

Tape& same_tape(std::initializer_list<Var> vars) {
    Tape* t = nullptr;
    for (const Var& v : vars) {
        if (!v.valid()) {
            throw ContractError("use of an unbound Var");
        }
        if (t != nullptr && v.tape() != t) {
            throw ContractError("operands live on different tapes");
        }
        t = v.tape();
    }
    return *t;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": " + a.shape() + " vs " + b.shape());
    }
}

}  // namespace

Var matmul(Var a, Var b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul shape mismatch: " + a.value().shape() + " x " + b.value().shape());
    }
    return same_tape({a, b}).record(
        {a, b}, [](Inputs in) { return tatt::matmul(*in[0], *in[1]); },
        [](Inputs in, const Matrix&, const Matrix& g, InputGrads dg) {
            if (dg[0] != nullptr) {
                kernel::gemm(g, false, *in[1], true, *dg[0], true);
            }
            if (dg[1] != nullptr) {
                kernel::gemm(*in[0], true, g, false, *dg[1], true);
            }
        });
}

Var matmul_nt(Var a, Var b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul shape mismatch: " + a.value().shape() + " x (" + b.value().shape() + ")^T");
    }
    return same_tape({a, b}).record(
        {a, b},
        [](Inputs in) {
            Matrix out;
            kernel::gemm(*in[0], false, *in[1], true, out, false);
            return out;
        },
        [](Inputs in, const Matrix&, const Matrix& g, InputGrads dg) {
            if (dg[0] != nullptr) {
                kernel::gemm(g, false, *in[1], false, *dg[0], true);
            }
            if (dg[1] != nullptr) {
                kernel::gemm(g, true, *in[0], false, *dg[1], true);
            }
        });
}

Var transpose(Var a) {
    return same_tape({a}).record(
        {a}, [](Inputs in) { return tatt::transpose(*in[0]); },
        [](Inputs, const Matrix&, const Matrix& g, InputGrads dg) {
            if (dg[0] != nullptr) {
                *dg[0] += tatt::transpose(g);
            }
        });
}

Var add(Var a, Var b) {
    require_same_shape(a.value(), b.value(), "add");
    return same_tape({a, b}).record(
        {a, b},
        [](Inputs in) {
            Matrix out = *in[0];
            out += *in[1];
            return out;
        },
        [](Inputs, const Matrix&, const Matrix& g, InputGrads dg) {
            for (Matrix* d : dg) {
                if (d != nullptr) {
                    *d += g;
                }
            }
        });
}

Var hadamard(Var a, Var b) {
    require_same_shape(a.value(), b.value(), "hadamard");
    return same_tape({a, b}).record(
        {a, b},
        [](Inputs in) {
            Matrix out = *in[0];
            auto o = out.data();
            auto r = in[1]->data();
            for (std::size_t i = 0; i < o.size(); ++i) {
                o[i] *= r[i];
            }
            return out;
        },
        [](Inputs in, const Matrix&, const Matrix& g, InputGrads dg) {
            for (std::size_t side = 0; side < 2; ++side) {
                if (dg[side] == nullptr) {
                    continue;
                }
                auto d = dg[side]->data();
                auto other = in[1 - side]->data();
                auto gd = g.data();
                for (std::size_t i = 0; i < d.size(); ++i) {
                    d[i] += gd[i] * other[i];
                }
            }
        });
}

Var scale(Var a, double s) {
    return same_tape({a}).record(
        {a},
        [s](Inputs in) {
            Matrix out = *in[0];
            out *= s;
            return out;
        },
        [s](Inputs, const Matrix&, const Matrix& g, InputGrads dg) {
            if (dg[0] != nullptr) {
                auto d = dg[0]->data();
                auto gd = g.data();
                for (std::size_t i = 0; i < d.size(); ++i) {
                    d[i] += s * gd[i];
                }
            }
        });
}

Var divide_by_scalar(Var a, Var s) {
    if (s.rows() != 1 || s.cols() != 1) {
        throw ShapeError("divide_by_scalar: divisor must be 1x1, got " + s.value().shape());
    }
    return same_tape({a, s}).record(
        {a, s},
        [](Inputs in) {
            Matrix out = *in[0];
            out *= 1.0 / (*in[1])(0, 0);
            return out;
        },
        [](Inputs in, const Matrix&, const Matrix& g, InputGrads dg) {
            const double sv = (*in[1])(0, 0);
            auto gd = g.data();
            if (dg[0] != nullptr) {
                auto d = dg[0]->data();
                for (std::size_t i = 0; i < d.size(); ++i) {
                    d[i] += gd[i] / sv;
                }
            }
            if (dg[1] != nullptr) {
                auto av = in[0]->data();
                double acc = 0.0;
                for (std::size_t i = 0; i < av.size(); ++i) {
                    acc += gd[i] * av[i];
                }
                (*dg[1])(0, 0) -= acc / (sv * sv);
            }
        });
}

Var add_row(Var a, Var bias) {
    if (bias.rows() != 1 || bias.cols() != a.cols()) {
        throw ShapeError("add_row: bias " + bias.value().shape() + " for input " + a.value().shape());
    }
    return same_tape({a, bias}).record(
        {a, bias},
        [](Inputs in) {
            Matrix out = *in[0];
            const auto b = in[1]->row(0);
            for (std::size_t r = 0; r < out.rows(); ++r) {
                auto row = out.row(r);
                for (std::size_t c = 0; c < row.size(); ++c) {
                    row[c] += b[c];
                }
            }
            return out;
        },
        [](Inputs, const Matrix&, const Matrix& g, InputGrads dg) {
            if (dg[0] != nullptr) {
                *dg[0] += g;
            }
            if (dg[1] != nullptr) {
                auto d = dg[1]->row(0);
                for (std::size_t r = 0; r < g.rows(); ++r) {
                    const auto gr = g.row(r);
                    for (std::size_t c = 0; c < gr.size(); ++c) {
                        d[c] += gr[c];
                    }
                }
            }
        });
}

Var scale_rows(Var a, std::vector<double> factors) {
    if (factors.size() != a.rows()) {
        throw ShapeError("scale_rows: " + std::to_string(factors.size()) + " factors for " + a.value().shape());
    }
    return same_tape({a}).record(
        {a},
        [factors](Inputs in) {
            Matrix out = *in[0];
            for (std::size_t r = 0; r < out.rows(); ++r) {
                for (double& v : out.row(r)) {
                    v *= factors[r];
                }
            }
            return out;
        },
        [factors](Inputs, const Matrix&, const Matrix& g, InputGrads dg) {
            if (dg[0] == nullptr) {
                return;
            }
            for (std::size_t r = 0; r < g.rows(); ++r) {
                auto d = dg[0]->row(r);
                const auto gr = g.row(r);
                for (std::size_t c = 0; c < gr.size(); ++c) {
                    d[c] += factors[r] * gr[c];
                }
            }
        });
}

Var softmax_rows(Var a) {
    return same_tape({a}).record(
        {a}, [](Inputs in) { return tatt::softmax_rows(*in[0]); },
        [](Inputs, const Matrix& y, const Matrix& g, InputGrads dg) {
            if (dg[0] == nullptr) {
                return;
            }
            for (std::size_t r = 0; r < y.rows(); ++r) {
                const auto yr = y.row(r);
                const auto gr = g.row(r);
                double dot = 0.0;
                for (std::size_t c = 0; c < yr.size(); ++c) {
                    dot += yr[c] * gr[c];
                }
                auto d = dg[0]->row(r);
                for (std::size_t c = 0; c < yr.size(); ++c) {
                    d[c] += yr[c] * (gr[c] - dot);
                }
            }
        });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
    if (gain.rows() != 1 || bias.rows() != 1) {
        throw ShapeError("layer_norm: gain/bias must be row vectors, got " + gain.value().shape() + " and " +
                         bias.value().shape());
    }
    // Validates lengths and eps before recording.
    (void)tatt::layer_norm(Matrix(0, x.cols()), gain.value().row(0), bias.value().row(0), eps);
    return same_tape({x, gain, bias})
        .record(
            {x, gain, bias},
            [eps](Inputs in) { return tatt::layer_norm(*in[0], in[1]->row(0), in[2]->row(0), eps); },
            [eps](Inputs in, const Matrix&, const Matrix& g, InputGrads dg) {
                const Matrix& xv = *in[0];
                const auto gamma = in[1]->row(0);
                const std::size_t n = xv.cols();
                const double nn = static_cast<double>(n);
                std::vector<double> xhat(n);
                std::vector<double> dxhat(n);
                for (std::size_t r = 0; r < xv.rows(); ++r) {
                    const auto xr = xv.row(r);
                    const auto gr = g.row(r);
                    double mean = 0.0;
                    for (double v : xr) {
                        mean += v;
                    }
                    mean /= nn;
                    double var = 0.0;
                    for (double v : xr) {
                        var += (v - mean) * (v - mean);
                    }
                    var /= nn;
                    const double inv = 1.0 / std::sqrt(var + eps);
                    double sum_dxhat = 0.0;
                    double sum_dxhat_xhat = 0.0;
                    for (std::size_t c = 0; c < n; ++c) {
                        xhat[c] = (xr[c] - mean) * inv;
                        dxhat[c] = gr[c] * gamma[c];
                        sum_dxhat += dxhat[c];
                        sum_dxhat_xhat += dxhat[c] * xhat[c];
                    }
                    if (dg[0] != nullptr) {
                        auto d = dg[0]->row(r);
                        for (std::size_t c = 0; c < n; ++c) {
                            d[c] += inv / nn * (nn * dxhat[c] - sum_dxhat - xhat[c] * sum_dxhat_xhat);
                        }
                    }
                    if (dg[1] != nullptr) {
                        auto d = dg[1]->row(0);
                        for (std::size_t c = 0; c < n; ++c) {
                            d[c] += gr[c] * xhat[c];
                        }
                    }
                    if (dg[2] != nullptr) {
                        auto d = dg[2]->row(0);
                        for (std::size_t c = 0; c < n; ++c) {
                            d[c] += gr[c];
                        }
                    }
                }
            });
}

Var gelu(Var a) {
    return same_tape({a}).record(
        {a}, [](Inputs in) { return tatt::gelu(*in[0]); },
        [](Inputs in, const Matrix&, const Matrix& g, InputGrads dg) {
            if (dg[0] == nullptr) {
                return;
            }
            constexpr double k = 0.7978845608028654;
            constexpr double c3 = 0.044715;
            auto xv = in[0]->data();
            auto gd = g.data();
            auto d = dg[0]->data();
            for (std::size_t i = 0; i < xv.size(); ++i) {
                const double x = xv[i];
                const double th = std::tanh(k * (x + c3 * x * x * x));
                const double dydx = 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * k * (1.0 + 3.0 * c3 * x * x);
                d[i] += gd[i] * dydx;
            }
        });
}

Var gather_rows(Var table, std::vector<std::size_t> indices) {
    const std::size_t n_rows = table.rows();
    for (std::size_t idx : indices) {
        if (idx >= n_rows) {
            throw ShapeError("gather_rows: index " + std::to_string(idx) + " out of range for table " +
                             table.value().shape());
        }
    }
    return same_tape({table}).record(
        {table},
        [indices](Inputs in) {
            const Matrix& t = *in[0];
            Matrix out(indices.size(), t.cols());
            for (std::size_t i = 0; i < indices.size(); ++i) {
                std::copy_n(t.row(indices[i]).begin(), t.cols(), out.row(i).begin());
            }
            return out;
        },
        [indices](Inputs, const Matrix&, const Matrix& g, InputGrads dg) {
            if (dg[0] == nullptr) {
                return;
            }
            for (std::size_t i = 0; i < indices.size(); ++i) {
                auto d = dg[0]->row(indices[i]);
                const auto gr = g.row(i);
                for (std::size_t c = 0; c < gr.size(); ++c) {
                    d[c] += gr[c];
                }
            }
        });
}

Var row_slice(Var a, std::size_t begin, std::size_t count) {
    if (begin + count > a.rows()) {
        throw ShapeError("row_slice [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + a.value().shape());
    }
    return same_tape({a}).record(
        {a},
        [begin, count](Inputs in) {
            const Matrix& m = *in[0];
            const auto src = m.data().subspan(begin * m.cols(), count * m.cols());
            return Matrix(count, m.cols(), std::vector<double>(src.begin(), src.end()));
        },
        [begin](Inputs, const Matrix&, const Matrix& g, InputGrads dg) {
            if (dg[0] == nullptr) {
                return;
            }
            auto d = dg[0]->data().subspan(begin * g.cols(), g.size());
            auto gd = g.data();
            for (std::size_t i = 0; i < gd.size(); ++i) {
                d[i] += gd[i];
            }
        });
}

Var col_slice(Var a, std::size_t begin, std::size_t count) {
    if (begin + count > a.cols()) {
        throw ShapeError("col_slice [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + a.value().shape());
    }
    return same_tape({a}).record(
        {a},
        [begin, count](Inputs in) {
            const Matrix& m = *in[0];
            Matrix out(m.rows(), count);
            for (std::size_t r = 0; r < m.rows(); ++r) {
                std::copy_n(m.row(r).begin() + static_cast<std::ptrdiff_t>(begin), count, out.row(r).begin());
            }
            return out;
        },
        [begin](Inputs, const Matrix&, const Matrix& g, InputGrads dg) {
            if (dg[0] == nullptr) {
                return;
            }
            for (std::size_t r = 0; r < g.rows(); ++r) {
                auto d = dg[0]->row(r).subspan(begin, g.cols());
                const auto gr = g.row(r);
                for (std::size_t c = 0; c < gr.size(); ++c) {
                    d[c] += gr[c];
                }
            }
        });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) {
        throw ContractError("concat_cols of nothing");
    }
    std::vector<std::size_t> widths;
    for (const Var& p : parts) {
        if (p.rows() != parts.front().rows()) {
            throw ShapeError("concat_cols: " + p.value().shape() + " vs " + parts.front().value().shape());
        }
        widths.push_back(p.cols());
    }
    return parts.front().tape()->record(
        parts,
        [](Inputs in) {
            std::size_t total = 0;
            for (const Matrix* m : in) {
                total += m->cols();
            }
            Matrix out(in[0]->rows(), total);
            std::size_t off = 0;
            for (const Matrix* m : in) {
                for (std::size_t r = 0; r < m->rows(); ++r) {
                    std::copy_n(m->row(r).begin(), m->cols(), out.row(r).begin() + static_cast<std::ptrdiff_t>(off));
                }
                off += m->cols();
            }
            return out;
        },
        [widths](Inputs, const Matrix&, const Matrix& g, InputGrads dg) {
            std::size_t off = 0;
            for (std::size_t p = 0; p < dg.size(); ++p) {
                if (dg[p] != nullptr) {
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                        auto d = dg[p]->row(r);
                        const auto gr = g.row(r).subspan(off, widths[p]);
                        for (std::size_t c = 0; c < widths[p]; ++c) {
                            d[c] += gr[c];
                        }
                    }
                }
                off += widths[p];
            }
        });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) {
        throw ContractError("concat_rows of nothing");
    }
    for (const Var& p : parts) {
        if (p.cols() != parts.front().cols()) {
            throw ShapeError("concat_rows: " + p.value().shape() + " vs " + parts.front().value().shape());
        }
    }
    return parts.front().tape()->record(
        parts,
        [](Inputs in) {
            std::vector<double> data;
            std::size_t rows = 0;
            for (const Matrix* m : in) {
                data.insert(data.end(), m->data().begin(), m->data().end());
                rows += m->rows();
            }
            return Matrix(rows, in[0]->cols(), std::move(data));
        },
        [](Inputs in, const Matrix&, const Matrix& g, InputGrads dg) {
            std::size_t off = 0;
            for (std::size_t p = 0; p < dg.size(); ++p) {
                const std::size_t len = in[p]->size();
                if (dg[p] != nullptr) {
                    auto d = dg[p]->data();
                    auto gd = g.data().subspan(off, len);
                    for (std::size_t i = 0; i < len; ++i) {
                        d[i] += gd[i];
                    }
                }
                off += len;
            }
        });
}

Var frobenius_norm(Var a) {
    return same_tape({a}).record(
        {a}, [](Inputs in) { return Matrix(1, 1, tatt::frobenius_norm(*in[0])); },
        [](Inputs in, const Matrix& y, const Matrix& g, InputGrads dg) {
            const double nrm = y(0, 0);
            if (dg[0] == nullptr || nrm == 0.0) {
                return;
            }
            const double s = g(0, 0) / nrm;
            auto d = dg[0]->data();
            auto av = in[0]->data();
            for (std::size_t i = 0; i < d.size(); ++i) {
                d[i] += s * av[i];
            }
        });
}

Var sum(Var a) {
    return same_tape({a}).record(
        {a},
        [](Inputs in) {
            double s = 0.0;
            for (double v : in[0]->data()) {
                s += v;
            }
            return Matrix(1, 1, s);
        },
        [](Inputs, const Matrix&, const Matrix& g, InputGrads dg) {
            if (dg[0] == nullptr) {
                return;
            }
            for (double& d : dg[0]->data()) {
                d += g(0, 0);
            }
        });
}

Var cross_entropy(Var logits, std::vector<std::size_t> labels) {
    if (labels.size() != logits.rows() || labels.empty()) {
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                         logits.value().shape());
    }
    for (std::size_t l : labels) {
        if (l >= logits.cols()) {
            throw ShapeError("cross_entropy: label " + std::to_string(l) + " out of range for " +
                             logits.value().shape());
        }
    }
    return same_tape({logits}).record(
        {logits},
        [labels](Inputs in) {
            const Matrix& z = *in[0];
            double total = 0.0;
            for (std::size_t r = 0; r < z.rows(); ++r) {
                const auto row = z.row(r);
                const double mx = *std::max_element(row.begin(), row.end());
                double se = 0.0;
                for (double v : row) {
                    se += std::exp(v - mx);
                }
                total += mx + std::log(se) - row[labels[r]];
            }
            return Matrix(1, 1, total / static_cast<double>(z.rows()));
        },
        [labels](Inputs in, const Matrix&, const Matrix& g, InputGrads dg) {
            if (dg[0] == nullptr) {
                return;
            }
            const Matrix p = tatt::softmax_rows(*in[0]);
            const double s = g(0, 0) / static_cast<double>(p.rows());
            for (std::size_t r = 0; r < p.rows(); ++r) {
                auto d = dg[0]->row(r);
                const auto pr = p.row(r);
                for (std::size_t c = 0; c < pr.size(); ++c) {
                    d[c] += s * (pr[c] - (c == labels[r] ? 1.0 : 0.0));
                }
            }
        });
}

}  // namespace tatt
