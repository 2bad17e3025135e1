#include "dsas/reports.hpp"

#include <cstdio>

namespace dsas {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

}  // namespace

std::string flows_csv(const FlowReport& report) {
  std::string out = "layer,paragraph,flow_q,flow_t\n";
  for (std::size_t l = 0; l < report.num_layers(); ++l) {
    for (std::size_t m = 0; m < report.num_paragraphs(); ++m) {
      out += std::to_string(report.layers[l]) + ',' + std::to_string(m) + ',' +
             format_double(report.flow_q[l][m]) + ',' + format_double(report.flow_t[l][m]) + '\n';
    }
  }
  return out;
}

std::string flow_groups_csv(const FlowReport& report) {
  std::string out = "layer,group,flow_q,flow_t\n";
  auto emit = [&](const std::string& layer, const FlowGroupMeans& g) {
    out += layer + ",supporting," + opt(g.supporting_q) + ',' + opt(g.supporting_t) + '\n';
    out += layer + ",negative," + opt(g.negative_q) + ',' + opt(g.negative_t) + '\n';
  };
  for (std::size_t l = 0; l < report.num_layers(); ++l) {
    emit(std::to_string(report.layers[l]), report.groups[l]);
  }
  emit("all", report.aggregate());
  return out;
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::string out = "component";
  for (const auto& l : cm.labels) out += ',' + l;
  out += '\n';
  for (std::size_t a = 0; a < cm.size(); ++a) {
    out += cm.labels[a];
    for (std::size_t b = 0; b < cm.size(); ++b) out += ',' + format_double(cm.at(a, b));
    out += '\n';
  }
  return out;
}

std::string gate_weights_csv(const GateWeights& gates) {
  std::string out = "paragraph,I_comb,v,gamma,rank,g,w_raw,w\n";
  for (std::size_t m = 0; m < gates.size(); ++m) {
    const auto& p = gates.paragraphs[m];
    out += std::to_string(m) + ',' + format_double(p.combined_flow) + ',' +
           format_double(p.content_value) + ',' + format_double(p.positional_value) + ',' +
           std::to_string(p.rank) + ',' + format_double(p.position_weight) + ',' +
           format_double(p.raw_weight) + ',' + format_double(p.final_weight) + '\n';
  }
  return out;
}

std::string partition_csv(std::span<const SelectedLayerTrace> layers) {
  std::string out = "layer,paragraph,w,set\n";
  for (const auto& st : layers) {
    for (std::size_t m = 0; m < st.gates.size(); ++m) {
      out += std::to_string(st.layer) + ',' + std::to_string(m) + ',' +
             format_double(st.gates.paragraphs[m].final_weight) + ',' +
             (st.partition.is_key(m) ? "key" : "irrelevant") + '\n';
    }
  }
  return out;
}

}  // namespace dsas
