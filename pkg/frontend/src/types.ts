export type Strategy = "mesh-skin" | "cloud-recon";

export interface JointInfo {
  id: number;
  name: string;
  axis: number[];
  center: number[];
  limits: [number, number];
  initial: number;
}

export interface MeshData {
  vertices: number[][];
  faces: number[][];
}

export interface ReposeResponse {
  strategy: Strategy;
  clamped: boolean;
  angles: number[];
  vertex_count: number;
  face_count: number;
  mesh: MeshData;
}

export interface SessionInfo {
  session_id: string;
  category: string;
  n_joints: number;
  n_parts: number;
  vertex_count: number;
  face_count: number;
}
